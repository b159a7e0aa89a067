//! Config-driven command implementations shared by the CLI binary and the
//! examples. Each command resolves the measure and coefficients, runs its
//! piece of the pipeline, and writes CSV/JSON artifacts stamped with the
//! config hash.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::cell::{ergodic_constant, ergodic_constant_max, ErgodicResult};
use crate::config::{
    default_extraction_samples, resolve_coefficients, resolve_form, resolve_measure,
    ResolvedMeasure, RunConfig,
};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::grid::{PeriodicField, TorusGrid};
use crate::homogenize::{convergence_study, StudyInputs};
use crate::measures::{check_homogeneity, estimate_alpha, extract_q0, norm};
use crate::operator::assemble_periodic;
use crate::quadrature::{build_rule, QuadratureRule, RuleParams};
use crate::reachability::{build_graph, check_condition_b};

/// What a command produced: whether the mathematical check it ran passed,
/// a one-line summary, and the files written.
#[derive(Debug)]
pub struct CommandReport {
    pub passed: bool,
    pub headline: String,
    pub files: Vec<PathBuf>,
}

fn ensure_out_dir(cfg: &RunConfig, out_override: Option<&Path>) -> Result<PathBuf> {
    let dir = out_override
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn open_csv(path: &Path, hash: &str, header: &str) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "{header}")?;
    Ok(w)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn rule_params(cfg: &RunConfig) -> RuleParams {
    RuleParams {
        rho: cfg.discretization.rho,
        r_outer: cfg.discretization.r_outer,
        cells_per_decade: cfg.discretization.cells_per_decade,
        angular_sectors: cfg.discretization.angular_sectors,
    }
}

fn cell_rule_params(cfg: &RunConfig) -> RuleParams {
    RuleParams {
        rho: cfg.discretization.cell_rho,
        r_outer: cfg.discretization.cell_r_outer,
        cells_per_decade: cfg.discretization.cells_per_decade,
        angular_sectors: cfg.discretization.angular_sectors,
    }
}

fn resolve_primary(cfg: &RunConfig) -> Result<ResolvedMeasure> {
    resolve_measure(
        &cfg.problem.measure,
        &cfg.problem.beta,
        resolve_form(&cfg.problem),
    )
}

fn resolve_secondary(cfg: &RunConfig) -> Result<Option<ResolvedMeasure>> {
    match (&cfg.problem.measure2, &cfg.problem.beta2) {
        (Some(m), Some(b)) => Ok(Some(resolve_measure(m, b, resolve_form(&cfg.problem))?)),
        (None, None) => Ok(None),
        _ => Err(Error::config(
            "measure2 and beta2 must be provided together",
        )),
    }
}

/// Condition-(A) diagnostics: rescaling extraction, exponent estimate,
/// homogeneity of the limit.
pub fn cmd_check_measure(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandReport> {
    let dir = ensure_out_dir(cfg, out)?;
    let hash = cfg.hash();
    let resolved = resolve_primary(cfg)?;
    let q = &resolved.density;
    let alpha = q.alpha;
    let samples = default_extraction_samples(q.dim);
    let eps_seq = crate::measures::default_eps_seq();
    let (snapshot, rescaling) = extract_q0(q, alpha, &eps_seq, &samples)?;

    let radii: Vec<f64> = (1..=8).map(|k| 0.5f64.powi(k)).collect();
    let alpha_estimate = estimate_alpha(q, &radii)?;

    // Homogeneity is certified on the analytic limit for built-ins; an
    // extracted snapshot of a non-self-similar density only approaches
    // homogeneity as eps drops, so it is reported, not gated.
    let homogeneity = check_homogeneity(&resolved.rescaled, 1000, cfg.solver.seed)?;
    let snapshot_homogeneity = check_homogeneity(&snapshot, 200, cfg.solver.seed ^ 0x5eed)?;

    // Deviation of the snapshot from the analytic limit, relative to the
    // homogeneous scale.
    let mut snapshot_deviation = 0.0f64;
    if resolved.analytic_limit {
        let p = q.dim as f64 + alpha;
        for z in &samples {
            let scale = norm(z).powf(-p);
            let want = resolved.rescaled.eval(z);
            let got = snapshot.eval(z);
            let denom = want.max(scale);
            snapshot_deviation = snapshot_deviation.max((got - want).abs() / denom);
        }
    }

    let csv_path = dir.join("rescaling.csv");
    {
        let dim_headers: Vec<String> = (1..=q.dim).map(|d| format!("z{d}")).collect();
        let header = format!("{},eps,rescaled_value", dim_headers.join(","));
        let mut w = open_csv(&csv_path, &hash, &header)?;
        for trace in &rescaling.traces {
            let coords: Vec<String> = trace.z.iter().map(|c| format!("{c:.17e}")).collect();
            for (&eps, &value) in eps_seq.iter().zip(&trace.values) {
                writeln!(w, "{},{eps:.17e},{value:.17e}", coords.join(","))?;
            }
        }
    }

    let passed = !rescaling.degenerate
        && (!resolved.analytic_limit || homogeneity.passed)
        && alpha_estimate.in_range;
    let report = json!({
        "config_hash": hash,
        "alpha_declared": alpha,
        "alpha_estimated": alpha_estimate.alpha,
        "alpha_in_range": alpha_estimate.in_range,
        "c1_bound": rescaling.c1,
        "support_samples": rescaling.support_count,
        "total_samples": rescaling.traces.len(),
        "degenerate_limit": rescaling.degenerate,
        "final_eps": rescaling.final_eps,
        "homogeneity_passed": homogeneity.passed,
        "homogeneity_max_rel_error": homogeneity.max_rel_error,
        "snapshot_homogeneity_max_rel_error": snapshot_homogeneity.max_rel_error,
        "snapshot_vs_analytic_limit": if resolved.analytic_limit {
            json!(snapshot_deviation)
        } else {
            json!(null)
        },
        "passed": passed,
    });
    let json_path = dir.join("measure_report.json");
    write_json(&json_path, &report)?;

    Ok(CommandReport {
        passed,
        headline: format!(
            "condition (A): C1 = {:.4e}, alpha estimate {:.6} (declared {alpha}), \
             {} of {} samples in the limiting cone, homogeneity max error {:.3e}",
            rescaling.c1,
            alpha_estimate.alpha,
            rescaling.support_count,
            rescaling.traces.len(),
            homogeneity.max_rel_error
        ),
        files: vec![json_path, csv_path],
    })
}

fn reachability_rules(cfg: &RunConfig) -> Result<Vec<QuadratureRule>> {
    let params = cell_rule_params(cfg);
    let primary = resolve_primary(cfg)?;
    let mut rules = vec![build_rule(
        &primary.rescaled.as_levy(primary.density.form),
        &primary.beta,
        &params,
    )?];
    if let Some(second) = resolve_secondary(cfg)? {
        rules.push(build_rule(
            &second.rescaled.as_levy(second.density.form),
            &second.beta,
            &params,
        )?);
    }
    Ok(rules)
}

/// Condition-(B) check: jump-graph strong connectivity on the torus.
pub fn cmd_reachability(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandReport> {
    let dir = ensure_out_dir(cfg, out)?;
    let hash = cfg.hash();
    let grid = TorusGrid::new(cfg.problem.dim, cfg.discretization.cell_n)?;
    let eps_ball = cfg.discretization.eps_ball.unwrap_or_else(|| grid.spacing());
    let rules = reachability_rules(cfg)?;
    let rule_refs: Vec<&QuadratureRule> = rules.iter().collect();
    let graph = build_graph(&grid, &rule_refs, eps_ball)?;
    graph.verify_witnesses(&rule_refs)?;
    let report = check_condition_b(&graph);

    let edges_path = dir.join("graph_edges.csv");
    if graph.edge_count() <= 200_000 {
        let mut w = open_csv(&edges_path, &hash, "from,to,structure,node")?;
        for (from, edges) in graph.adjacency.iter().enumerate() {
            for e in edges {
                writeln!(w, "{from},{},{},{}", e.to, e.witness.0, e.witness.1)?;
            }
        }
    }

    let witness = report.witness.as_ref().map(|(from, to, reachable)| {
        json!({
            "from": from,
            "from_point": grid.point(*from),
            "to": to,
            "to_point": grid.point(*to),
            "reachable_count": reachable.len(),
        })
    });
    let json_path = dir.join("reachability.json");
    write_json(
        &json_path,
        &json!({
            "config_hash": hash,
            "pass": report.pass,
            "component_count": report.component_count,
            "edge_count": graph.edge_count(),
            "eps_ball": eps_ball,
            "structures": rules.len(),
            "witness": witness,
            "resolution_note": format!(
                "connectivity assessed at grid resolution 1/{}, ball radius {eps_ball}; \
                 jump sets dense only in the continuum (irrational windings) are \
                 represented at this resolution",
                grid.n
            ),
        }),
    )?;

    Ok(CommandReport {
        passed: report.pass,
        headline: if report.pass {
            format!(
                "controllability holds: one component over {} nodes, {} edges",
                grid.len(),
                graph.edge_count()
            )
        } else {
            format!(
                "controllability FAILS: {} components; see witness in reachability.json",
                report.component_count
            )
        },
        files: vec![json_path, edges_path],
    })
}

struct CellSetup {
    grid: TorusGrid,
    a_values: Vec<f64>,
    f_field: PeriodicField,
    ops: Vec<crate::operator::DiscreteOperator>,
}

fn cell_setup(cfg: &RunConfig) -> Result<CellSetup> {
    let grid = TorusGrid::new(cfg.problem.dim, cfg.discretization.cell_n)?;
    let (a, f, _) = resolve_coefficients(&cfg.problem, cfg.solver.seed)?;
    let a_values: Vec<f64> = (0..grid.len()).map(|i| a(&grid.point(i))).collect();
    let f_field = PeriodicField::from_fn(&grid, |y| f(y));
    let params = cell_rule_params(cfg);
    let primary = resolve_primary(cfg)?;
    let mut ops = vec![assemble_periodic(
        &grid,
        &build_rule(
            &primary.rescaled.as_levy(primary.density.form),
            &primary.beta,
            &params,
        )?,
    )?];
    if let Some(second) = resolve_secondary(cfg)? {
        ops.push(assemble_periodic(
            &grid,
            &build_rule(
                &second.rescaled.as_levy(second.density.form),
                &second.beta,
                &params,
            )?,
        )?);
    }
    Ok(CellSetup {
        grid,
        a_values,
        f_field,
        ops,
    })
}

fn write_cell_artifacts(
    dir: &Path,
    hash: &str,
    result: &ErgodicResult,
    coupled: bool,
) -> Result<Vec<PathBuf>> {
    let trace_path = dir.join("lambda_trace.csv");
    let mut w = open_csv(
        &trace_path,
        hash,
        "lambda,d_estimate,oscillation,holder_seminorm",
    )?;
    for p in &result.trace {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            p.lambda, p.d_estimate, p.oscillation, p.holder_seminorm
        )?;
    }
    drop(w);
    let json_path = dir.join("cell_result.json");
    write_json(
        &json_path,
        &json!({
            "config_hash": hash,
            "d": result.d,
            "oscillation": result.oscillation,
            "converged": result.converged,
            "certificate_delta": result.certificate_delta,
            "coupled_max_form": coupled,
            "lambda_final": result.trace.last().map(|p| p.lambda),
        }),
    )?;
    Ok(vec![trace_path, json_path])
}

/// Ergodic cell problem: discounted sweep and the vanishing-discount limit.
pub fn cmd_cell(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandReport> {
    let dir = ensure_out_dir(cfg, out)?;
    let hash = cfg.hash();
    let setup = cell_setup(cfg)?;
    let lambda_seq = cfg.lambda_seq();
    let coupled = setup.ops.len() > 1;
    let result = if coupled {
        let refs: Vec<&crate::operator::DiscreteOperator> = setup.ops.iter().collect();
        ergodic_constant_max(
            &setup.a_values,
            &setup.f_field,
            &refs,
            &vec![0.0; refs.len()],
            &lambda_seq,
            cfg.solver.osc_tol,
        )?
    } else {
        ergodic_constant(
            &setup.a_values,
            &setup.f_field,
            &setup.ops[0],
            &lambda_seq,
            cfg.solver.osc_tol,
        )?
    };
    let files = write_cell_artifacts(&dir, &hash, &result, coupled)?;
    Ok(CommandReport {
        passed: true,
        headline: format!(
            "ergodic constant d = {:.10e} (oscillation {:.3e}, {})",
            result.d,
            result.oscillation,
            if result.converged {
                "converged"
            } else {
                "sequence exhausted - treat as provisional"
            }
        ),
        files,
    })
}

/// Tabulate the effective operator and certify subellipticity.
pub fn cmd_effective(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandReport> {
    let dir = ensure_out_dir(cfg, out)?;
    let hash = cfg.hash();
    let setup = cell_setup(cfg)?;
    if setup.ops.len() > 1 {
        return Err(Error::config(
            "the effective command tabulates the scalar problem; the coupled \
             max form is exercised through the cell command",
        ));
    }
    let i_grid = cfg.solver.i_grid.clone().unwrap_or_else(|| {
        let m = cfg.solver.i_grid_points.max(5);
        (0..m)
            .map(|k| -2.0 + 4.0 * k as f64 / (m - 1) as f64)
            .collect()
    });
    let table = crate::effective::tabulate(
        &setup.a_values,
        &setup.f_field,
        &setup.ops[0],
        &i_grid,
        &cfg.lambda_seq(),
        cfg.solver.osc_tol,
    )?;
    let (theta, subelliptic) = table.check_subellipticity(cfg.problem.a0);

    let table_path = dir.join("effective_table.csv");
    let mut w = open_csv(&table_path, &hash, "I,Ibar")?;
    for &(i_value, ibar) in &table.samples {
        writeln!(w, "{i_value:.17e},{ibar:.17e}")?;
    }
    drop(w);
    let json_path = dir.join("effective_summary.json");
    write_json(
        &json_path,
        &json!({
            "config_hash": hash,
            "affine_fit": {
                "intercept": table.affine.intercept,
                "slope": table.affine.slope,
                "residual": table.affine.residual,
            },
            "theta": theta,
            "theta_gate": cfg.problem.a0 / 2.0,
            "subelliptic": subelliptic,
            "lambda_used": table.lambda_used,
            "converged": table.converged,
        }),
    )?;
    let _ = setup.grid;
    Ok(CommandReport {
        passed: subelliptic,
        headline: format!(
            "effective operator: slope {:.8e}, intercept {:.8e}, affine residual {:.3e}, \
             Theta = {theta:.6} (gate {:.6})",
            table.affine.slope,
            table.affine.intercept,
            table.affine.residual,
            cfg.problem.a0 / 2.0
        ),
        files: vec![table_path, json_path],
    })
}

/// Full convergence study: oscillatory solutions against the effective one.
pub fn cmd_homogenize(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandReport> {
    let dir = ensure_out_dir(cfg, out)?;
    let hash = cfg.hash();
    let primary = resolve_primary(cfg)?;
    let (a, f, phi) = resolve_coefficients(&cfg.problem, cfg.solver.seed)?;
    let inputs = StudyInputs {
        density: primary.density,
        rescaled: primary.rescaled,
        beta: primary.beta,
        a,
        f,
        phi,
        a0: cfg.problem.a0,
        domain_lo: cfg.problem.domain.lo.clone(),
        domain_hi: cfg.problem.domain.hi.clone(),
        n_domain: cfg.discretization.n,
        n_cell: cfg.discretization.cell_n,
        rule_params: rule_params(cfg),
        cell_rule_params: cell_rule_params(cfg),
        eps_list: cfg.solver.eps_list.clone(),
        lambda_seq: cfg.lambda_seq(),
        osc_tol: cfg.solver.osc_tol,
        omega: cfg.solver.omega,
        i_grid_points: cfg.solver.i_grid_points,
    };
    let study = convergence_study(&inputs)?;

    let csv_path = dir.join("study.csv");
    let mut w = open_csv(
        &csv_path,
        &hash,
        "epsilon,sup_error,interior_margin,solve_residual,wall_ms",
    )?;
    for e in &study.errors {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{}",
            e.eps, e.sup_error, e.interior_margin, e.solve_residual, e.wall_ms
        )?;
    }
    drop(w);

    let json_path = dir.join("study_summary.json");
    write_json(
        &json_path,
        &json!({
            "config_hash": hash,
            "config": serde_json::to_value(cfg)?,
            "errors": study.errors,
            "monotone": study.monotone,
            "effective": {
                "method": study.effective_info.method,
                "residual": study.effective_info.residual,
                "iterations": study.effective_info.iterations,
                "i_span": [study.effective_info.i_span.0, study.effective_info.i_span.1],
            },
            "effective_table": {
                "slope": study.table.affine.slope,
                "intercept": study.table.affine.intercept,
                "residual": study.table.affine.residual,
                "theta": study.theta,
                "subelliptic": study.subelliptic,
            },
        }),
    )?;

    let first = study.errors.first().map(|e| e.sup_error).unwrap_or(0.0);
    let last = study.errors.last().map(|e| e.sup_error).unwrap_or(0.0);
    Ok(CommandReport {
        passed: study.monotone,
        headline: format!(
            "study over {} eps values: e({}) = {first:.6e} down to e({}) = {last:.6e} ({})",
            study.errors.len(),
            study.errors.first().map(|e| e.eps).unwrap_or(0.0),
            study.errors.last().map(|e| e.eps).unwrap_or(0.0),
            if study.monotone {
                "strictly decreasing"
            } else {
                "NOT monotone"
            }
        ),
        files: vec![csv_path, json_path],
    })
}

/// Validate an expression config the way the CLI front end needs it; used by
/// the examples to keep parity with the binary.
pub fn parse_coefficient(text: &str, dim: usize, fast_variable: bool) -> Result<Expression> {
    let names: Vec<String> = (1..=dim)
        .map(|d| {
            if fast_variable {
                format!("y{d}")
            } else {
                format!("x{d}")
            }
        })
        .collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Expression::parse(text, &refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> RunConfig {
        RunConfig::from_json(json, &[]).unwrap()
    }

    fn ex1_config(dir: &Path) -> RunConfig {
        config(&format!(
            r#"{{
                "problem": {{
                    "dim": 1,
                    "measure": {{ "kind": "example1", "alpha": 1.5 }},
                    "a": "1",
                    "f": "cos(2*pi*y1)",
                    "phi": "0"
                }},
                "discretization": {{ "n": 64, "cell_n": 32, "cell_rho": 0.01 }},
                "solver": {{ "osc_tol": 1e-3 }},
                "output_dir": "{}"
            }}"#,
            dir.display()
        ))
    }

    #[test]
    fn check_measure_writes_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ex1_config(tmp.path());
        let report = cmd_check_measure(&cfg, None).unwrap();
        assert!(report.passed, "{}", report.headline);
        for f in &report.files {
            assert!(f.exists(), "missing {f:?}");
        }
        let text = std::fs::read_to_string(&report.files[1]).unwrap();
        assert!(text.starts_with("# config_hash="));
        assert!(text.lines().nth(1).unwrap().starts_with("z1,eps,"));
    }

    #[test]
    fn reachability_passes_for_one_sided_measure() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = ex1_config(tmp.path());
        cfg.discretization.cell_n = 32;
        cfg.discretization.eps_ball = Some(2.0 / 32.0);
        let report = cmd_reachability(&cfg, None).unwrap();
        assert!(report.passed, "{}", report.headline);
    }

    #[test]
    fn cell_command_reports_zero_for_mean_zero_source() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ex1_config(tmp.path());
        let report = cmd_cell(&cfg, None).unwrap();
        assert!(report.passed);
        let json_text =
            std::fs::read_to_string(tmp.path().join("cell_result.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json_text).unwrap();
        assert!(v["d"].as_f64().unwrap().abs() < 1e-6);
    }

    #[test]
    fn effective_command_certifies_subellipticity() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ex1_config(tmp.path());
        let report = cmd_effective(&cfg, None).unwrap();
        assert!(report.passed, "{}", report.headline);
        let text = std::fs::read_to_string(tmp.path().join("effective_table.csv")).unwrap();
        assert!(text.lines().count() >= 7); // hash + header + 5 samples
    }
}
