//! Quadrature rules for singular jump densities: nodes, weights, drift,
//! and the explicit truncation budgets against their closed forms.
//!
//! ```bash
//! cargo run --example quadrature_rules
//! ```

use levy_homog::measures::{builtin_example, BuiltinMeasure};
use levy_homog::quadrature::{build_rule, refine, RuleParams};

fn main() -> levy_homog::Result<()> {
    let (q, beta, _) = builtin_example(BuiltinMeasure::Ex1 { dim: 1, alpha: 1.5 })?;
    let params = RuleParams::new(1e-2, 4.0, 32);
    let rule = build_rule(&q, &beta, &params)?;

    println!(
        "one-sided power law, alpha = 1.5: {} nodes on [{}, {}]",
        rule.nodes.len(),
        rule.inner_cutoff,
        rule.outer_cutoff
    );
    println!("total mass  = {:.6e}", rule.total_mass());
    println!("drift |z|<=1 = {:+.6e}", rule.drift.as_ref().unwrap()[0]);
    println!("drift |z|>1  = {:+.6e}", rule.tail_drift.as_ref().unwrap()[0]);

    // the dropped inner ball carries int_0^rho z^2 dq = 2 sqrt(rho)
    let exact_inner = 2.0 * params.rho.sqrt();
    println!(
        "inner budget = {:.10e} (closed form {:.10e}, rel dev {:.2e})",
        rule.inner_error_bound,
        exact_inner,
        (rule.inner_error_bound - exact_inner).abs() / exact_inner
    );

    println!("\ndyadic refinement, budgets shrinking at rho^(2-alpha):");
    let rules = refine(&q, &beta, &params, 4)?;
    for (k, r) in rules.iter().enumerate() {
        println!(
            "  step {k}: rho = {:.3e}, inner budget {:.6e}, tail budget {:.6e}, {} nodes",
            r.inner_cutoff,
            r.inner_error_bound,
            r.tail_error_bound,
            r.nodes.len()
        );
    }
    let ratio = rules[1].inner_error_bound / rules[0].inner_error_bound;
    println!(
        "inner budget ratio per step: {:.6} (analytic 2^-0.5 = {:.6})",
        ratio,
        0.5f64.powf(0.5)
    );

    println!("\nfirst 5 rows of the rule dump:");
    let mut buf = Vec::new();
    rule.dump_csv(&mut buf)?;
    for line in String::from_utf8_lossy(&buf).lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
