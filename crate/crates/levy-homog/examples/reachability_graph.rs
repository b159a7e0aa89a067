//! Controllability of the jump process: strong connectivity of the one-hop
//! jump graph, with a mixing measure, a subgroup-confined one, and the
//! three-torus pair of structures that mix only jointly.
//!
//! ```bash
//! cargo run --example reachability_graph
//! ```

use levy_homog::grid::TorusGrid;
use levy_homog::measures::{builtin_example, BuiltinMeasure, JumpMap, KernelForm};
use levy_homog::quadrature::{build_rule, QuadratureRule, RuleParams};
use levy_homog::reachability::{build_graph, check_condition_b};

fn main() -> levy_homog::Result<()> {
    // one-sided jumps still wrap around the circle
    let (q, beta, _) = builtin_example(BuiltinMeasure::Ex1 { dim: 1, alpha: 1.5 })?;
    let rule = build_rule(&q, &beta, &RuleParams::new(0.05, 2.0, 8))?;
    let grid = TorusGrid::new(1, 32)?;
    let graph = build_graph(&grid, &[&rule], 2.0 / 32.0)?;
    let report = check_condition_b(&graph);
    println!(
        "one-sided measure on T^1 (n = 32): {} ({} components, {} edges)",
        verdict(report.pass),
        report.component_count,
        graph.edge_count()
    );

    // jumps confined to the half-period subgroup never mix
    let half = QuadratureRule {
        nodes: vec![vec![0.5], vec![-0.5]],
        weights: vec![1.0, 1.0],
        jumps: vec![vec![0.5], vec![-0.5]],
        drift: None,
        tail_drift: None,
        inner_cutoff: 0.1,
        outer_cutoff: 1.0,
        inner_error_bound: 0.0,
        tail_error_bound: 0.0,
        form: KernelForm::Gamma1,
    };
    let small = TorusGrid::new(1, 4)?;
    let graph = build_graph(&small, &[&half], 0.25)?;
    let report = check_condition_b(&graph);
    println!(
        "half-period jumps on T^1 (n = 4):  {} ({} components)",
        verdict(report.pass),
        report.component_count
    );
    if let Some((from, to, reachable)) = &report.witness {
        println!(
            "  witness: no path {from} -> {to}; {} of {} points reachable from {from}",
            reachable.len(),
            small.len()
        );
    }

    // a vertical line and a horizontal plane in T^3: each alone is confined
    // to its own subspace, the union mixes everything
    let (q1, _, _) = builtin_example(BuiltinMeasure::Ex4 {
        dim: 1,
        alpha: 1.5,
        decay: 1.0,
    })?;
    let line = build_rule(&q1, &JumpMap::line_z(), &RuleParams::new(0.05, 2.0, 8))?;
    let (q2, _, _) = builtin_example(BuiltinMeasure::Ex4 {
        dim: 2,
        alpha: 1.5,
        decay: 1.0,
    })?;
    let mut params = RuleParams::new(0.05, 2.0, 6);
    params.angular_sectors = 16;
    let plane = build_rule(&q2, &JumpMap::plane_xy(), &params)?;

    let torus3 = TorusGrid::new(3, 8)?;
    let eps_ball = 1.0 / 8.0;
    for (name, rules) in [
        ("line alone ", vec![&line]),
        ("plane alone", vec![&plane]),
        ("union      ", vec![&line, &plane]),
    ] {
        let graph = build_graph(&torus3, &rules, eps_ball)?;
        let report = check_condition_b(&graph);
        println!(
            "T^3 (n = 8), {name}: {} ({} components)",
            verdict(report.pass),
            report.component_count
        );
    }
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "controllable"
    } else {
        "NOT controllable"
    }
}
