//! The ergodic cell problem by the vanishing-discount method.
//!
//! With a == 1 and a mean-zero source the ergodic constant is zero (summing
//! the discrete equation over the torus annihilates the jump operator), so
//! the run prints a lambda trace whose mean stays at zero while the
//! oscillation collapses.
//!
//! ```bash
//! cargo run --example cell_problem
//! ```

use levy_homog::cell::{default_lambda_seq, ergodic_constant};
use levy_homog::grid::{PeriodicField, TorusGrid};
use levy_homog::measures::{builtin_example, BuiltinMeasure};
use levy_homog::operator::assemble_periodic;
use levy_homog::quadrature::{build_rule, RuleParams};

fn main() -> levy_homog::Result<()> {
    let (q, beta, q0) = builtin_example(BuiltinMeasure::Ex4 {
        dim: 1,
        alpha: 1.5,
        decay: 1.0,
    })?;
    let _ = q;
    let cell_density = q0.as_levy(levy_homog::measures::KernelForm::Gamma2);
    let rule = build_rule(&cell_density, &beta, &RuleParams::new(1e-2, 4.0, 32))?;
    let grid = TorusGrid::new(1, 128)?;
    let op = assemble_periodic(&grid, &rule)?;

    let a = vec![1.0; grid.len()];
    let f0 = PeriodicField::from_fn(&grid, |y| (std::f64::consts::TAU * y[0]).cos());

    let result = ergodic_constant(&a, &f0, &op, &default_lambda_seq(), 1e-4)?;
    println!("lambda        mean(lambda v)   oscillation   holder(1/2)");
    for p in &result.trace {
        println!(
            "{:.6e}  {:+.8e}  {:.6e}  {:.4}",
            p.lambda, p.d_estimate, p.oscillation, p.holder_seminorm
        );
    }
    println!("\nergodic constant d = {:+.10e}", result.d);
    println!("final oscillation  = {:.6e}", result.oscillation);
    println!("certificate delta  = {:.6e}", result.certificate_delta);
    println!(
        "corrector range    = [{:+.6e}, {:+.6e}]",
        result.corrector.inf(),
        result.corrector.sup()
    );
    Ok(())
}
