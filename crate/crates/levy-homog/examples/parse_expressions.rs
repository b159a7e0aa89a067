//! Coefficient expressions: parsing, evaluation, and the structural checks
//! run on every configured coefficient.
//!
//! ```bash
//! cargo run --example parse_expressions
//! ```

use levy_homog::expr::Expression;

fn main() -> levy_homog::Result<()> {
    let a = Expression::parse("2+cos(2*pi*y1)", &["y1"])?;
    println!("a(y) = {a}");
    for y in [0.0, 0.25, 0.5] {
        println!("  a({y}) = {}", a.eval(&[y])?);
    }

    let periodic = a.check_periodic(1, 128, 0)?;
    println!(
        "periodicity: {} (max defect {:.3e})",
        if periodic.passed { "ok" } else { "FAILED" },
        periodic.max_defect
    );

    let bound = a.check_positive_lower_bound(1.0, 256)?;
    println!(
        "lower bound a0 = 1: {} (min sampled value {:.6})",
        if bound.passed { "ok" } else { "FAILED" },
        bound.min_value
    );

    // a drifting coefficient is rejected by the same check
    let drifting = Expression::parse("y1", &["y1"])?;
    let report = drifting.check_periodic(1, 128, 0)?;
    println!(
        "'{drifting}' periodic? {} (defect {:.3e})",
        report.passed, report.max_defect
    );

    // evaluation errors are runtime errors, not parse errors
    let singular = Expression::parse("1/(1-y1)", &["y1"])?;
    match singular.eval(&[1.0]) {
        Err(e) => println!("'{singular}' at y1 = 1: {e}"),
        Ok(v) => println!("'{singular}' at y1 = 1: {v}"),
    }
    Ok(())
}
