//! One oscillatory Dirichlet solve: assembling the monotone jump operator on
//! a box with an exterior collar and solving `u - a(x/eps) L[u] = f(x/eps)`.
//!
//! ```bash
//! cargo run --example oscillatory_dirichlet
//! ```

use std::sync::Arc;

use levy_homog::grid::DomainGrid;
use levy_homog::homogenize::{solve_epsilon, Coefficient};
use levy_homog::measures::{builtin_example, BuiltinMeasure};
use levy_homog::operator::required_collar;
use levy_homog::quadrature::{build_rule, RuleParams};

fn main() -> levy_homog::Result<()> {
    let (q, beta, _) = builtin_example(BuiltinMeasure::Ex4 {
        dim: 1,
        alpha: 1.5,
        decay: 1.0,
    })?;
    let rule = build_rule(&q, &beta, &RuleParams::new(1e-3, 4.0, 32))?;
    let n = 256;
    let h = 1.0 / n as f64;
    let collar = required_collar(&rule, h);
    let grid = DomainGrid::new(vec![0.0], vec![1.0], n, collar)?;
    println!(
        "domain (0,1), {n} cells, collar of {collar} layers ({} exterior points)",
        grid.ext_len() - grid.interior_len()
    );

    let a: Coefficient = Arc::new(|y: &[f64]| 2.0 + (std::f64::consts::TAU * y[0]).cos());
    let f: Coefficient = Arc::new(|y: &[f64]| (std::f64::consts::TAU * y[0]).sin());
    let phi: Coefficient = Arc::new(|_: &[f64]| 0.0);

    for eps in [0.25, 0.125, 0.0625] {
        let (u, info) = solve_epsilon(&grid, &rule, &a, &f, &phi, eps)?;
        let interior = u.interior_values();
        let sup = interior.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mid = interior[interior.len() / 2];
        println!(
            "eps = {eps:<7} sup |u| = {sup:.6e}  u(1/2) = {mid:+.6e}  residual {:.2e}",
            info.residual
        );
    }
    Ok(())
}
