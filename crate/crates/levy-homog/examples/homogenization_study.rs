//! A small end-to-end convergence study: oscillatory solutions against the
//! effective one, sup errors away from the boundary layer.
//!
//! The full-size studies run through the binary (`levy-homog homogenize`);
//! this example keeps the grid small enough to finish in seconds.
//!
//! ```bash
//! cargo run --release --example homogenization_study
//! ```

use std::sync::Arc;

use levy_homog::cell::default_lambda_seq;
use levy_homog::homogenize::{convergence_study, StudyInputs};
use levy_homog::measures::{builtin_example, BuiltinMeasure};
use levy_homog::quadrature::RuleParams;

fn main() -> levy_homog::Result<()> {
    let (q, beta, q0) = builtin_example(BuiltinMeasure::Ex4 {
        dim: 1,
        alpha: 1.5,
        decay: 1.0,
    })?;
    let inputs = StudyInputs {
        density: q,
        rescaled: q0,
        beta,
        a: Arc::new(|y: &[f64]| 2.0 + (std::f64::consts::TAU * y[0]).cos()),
        f: Arc::new(|y: &[f64]| (std::f64::consts::TAU * y[0]).sin()),
        phi: Arc::new(|_: &[f64]| 0.0),
        a0: 1.0,
        domain_lo: vec![0.0],
        domain_hi: vec![1.0],
        n_domain: 256,
        n_cell: 64,
        rule_params: RuleParams::new(2e-3, 4.0, 24),
        cell_rule_params: RuleParams::new(1e-2, 4.0, 24),
        eps_list: vec![0.25, 0.125, 0.0625],
        lambda_seq: default_lambda_seq(),
        osc_tol: 1e-4,
        omega: 1.0,
        i_grid_points: 9,
    };

    let study = convergence_study(&inputs)?;
    println!(
        "effective solve: {} (residual {:.3e}), I span [{:+.4e}, {:+.4e}]",
        study.effective_info.method,
        study.effective_info.residual,
        study.effective_info.i_span.0,
        study.effective_info.i_span.1
    );
    println!(
        "effective table: slope {:+.6e}, Theta {:.4} ({})",
        study.table.affine.slope,
        study.theta,
        if study.subelliptic { "subelliptic" } else { "NOT subelliptic" }
    );
    println!("\n  eps       sup error     margin   residual");
    for e in &study.errors {
        println!(
            "  {:<8} {:.6e}  {:.3}   {:.3e}",
            e.eps, e.sup_error, e.interior_margin, e.solve_residual
        );
    }
    println!(
        "\nerror sequence is {}",
        if study.monotone {
            "strictly decreasing"
        } else {
            "NOT monotone - inspect the configuration"
        }
    );
    Ok(())
}
