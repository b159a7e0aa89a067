//! Rescaling an asymmetric density and extracting its most singular part.
//!
//! The two-exponent density has a heavier tail on the negative side near
//! zero; rescaling by eps^(1+alpha2) kills the lighter side, so the limit
//! lives on the negative half line only.
//!
//! ```bash
//! cargo run --example check_measure
//! ```

use levy_homog::measures::{
    builtin_example, check_homogeneity, estimate_alpha, extract_q0, BuiltinMeasure,
};

fn main() -> levy_homog::Result<()> {
    let (q, _beta, q0) = builtin_example(BuiltinMeasure::Ex2 {
        alpha1: 1.2,
        alpha2: 1.8,
    })?;
    println!("two-exponent density, alpha1 = 1.2, alpha2 = 1.8, rescaling exponent 1.8");

    let samples: Vec<Vec<f64>> = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
        .iter()
        .map(|&z| vec![z])
        .collect();
    // push the sequence deep enough that the vanishing side separates from
    // the detection threshold
    let eps_seq: Vec<f64> = (1..=52).map(|k| 0.5f64.powi(k)).collect();
    let (_snapshot, report) = extract_q0(&q, 1.8, &eps_seq, &samples)?;

    println!("domination constant C1 = {:.6}", report.c1);
    println!("sample -> in limiting cone?");
    for trace in &report.traces {
        println!(
            "  z = {:+.1}: {} (final rescaled value {:.6e})",
            trace.z[0],
            if trace.in_support { "yes" } else { "no " },
            trace.values.last().unwrap()
        );
    }

    let radii: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
    let est = estimate_alpha(&q, &radii)?;
    println!(
        "singularity exponent from log-log regression: {:.6} (in range: {})",
        est.alpha, est.in_range
    );

    let homog = check_homogeneity(&q0, 1000, 0)?;
    println!(
        "homogeneity of the analytic limit over 1000 samples: {} (max rel error {:.3e})",
        if homog.passed { "ok" } else { "FAILED" },
        homog.max_rel_error
    );
    Ok(())
}
