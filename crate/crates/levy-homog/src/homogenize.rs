//! The oscillatory Dirichlet problem, the effective problem, and the
//! convergence study tying them together.
//!
//! `u_eps` solves `u - a(x/eps) L[u] = f(x/eps)` on a box with exterior data
//! `phi`; the homogenized `u_bar` solves `u + Ibar(I[u]) = 0` where `I[.]` is
//! the same jump functional with the original measure and `Ibar` comes from
//! the cell-problem sweep. The study solves both on one global grid fine
//! enough for the smallest `eps` and reports sup errors away from the
//! boundary layer.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::effective::EffectiveOperator;
use crate::error::{Error, Result};
use crate::grid::{DomainField, DomainGrid, PeriodicField, TorusGrid};
use crate::linalg::MonotoneSystem;
use crate::measures::{JumpMap, LevyDensity, RescaledDensity};
use crate::operator::{assemble_domain, required_collar, DiscreteOperator};
use crate::quadrature::{build_rule, QuadratureRule, RuleParams};

pub type Coefficient = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy)]
pub struct SolveInfo {
    pub residual: f64,
    pub iterations: usize,
}

/// Build `(I - D_a A) u = f + D_a b` from the unscaled (`a == 1`) domain
/// operator and a per-row coefficient vector, and solve it.
fn solve_scaled_domain(
    raw_op: &DiscreteOperator,
    a_values: &[f64],
    f_values: &[f64],
) -> Result<(Vec<f64>, SolveInfo)> {
    let n = raw_op.n_rows;
    if a_values.len() != n || f_values.len() != n {
        return Err(Error::ShapeMismatch("coefficient/source length mismatch".into()));
    }
    if a_values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::config("coefficient a must be strictly positive"));
    }
    let b = raw_op
        .offset
        .as_ref()
        .ok_or_else(|| Error::ShapeMismatch("domain operator lacks its offset".into()))?;
    let mut diag = Vec::with_capacity(n);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = Vec::with_capacity(n);
    row_ptr.push(0);
    for i in 0..n {
        diag.push(1.0 + a_values[i] * (raw_op.row_coupling(i) + raw_op.leak(i)));
        for (j, c) in raw_op.row(i) {
            col_idx.push(j);
            vals.push(-a_values[i] * c);
        }
        row_ptr.push(col_idx.len());
        rhs.push(f_values[i] + a_values[i] * b[i]);
    }
    let sys = MonotoneSystem::new(diag, row_ptr, col_idx, vals)?;
    let factored = sys.factor()?;
    let (u, stats) = factored.solve(&rhs)?;
    Ok((
        u,
        SolveInfo {
            residual: stats.residual_inf,
            iterations: stats.iterations,
        },
    ))
}

/// Solve the oscillatory Dirichlet problem at scale `eps`.
///
/// `a` and `f` are the periodic coefficients (in the fast variable); `phi`
/// is the exterior Dirichlet datum in the slow variable.
pub fn solve_epsilon(
    grid: &DomainGrid,
    rule: &QuadratureRule,
    a: &Coefficient,
    f: &Coefficient,
    phi: &Coefficient,
    eps: f64,
) -> Result<(DomainField, SolveInfo)> {
    if eps <= 0.0 {
        return Err(Error::config("eps must be positive"));
    }
    let raw_op = assemble_domain(grid, rule, &|x| phi(x), &|_| 1.0)?;
    let scaled: Vec<Vec<f64>> = grid
        .interior()
        .iter()
        .map(|&flat| grid.ext_point(flat).iter().map(|x| x / eps).collect())
        .collect();
    let a_values: Vec<f64> = scaled.iter().map(|y| a(y)).collect();
    let f_values: Vec<f64> = scaled.iter().map(|y| f(y)).collect();
    let (u, info) = solve_scaled_domain(&raw_op, &a_values, &f_values)?;
    let data_norm = f_values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        + (0..grid.ext_len())
            .filter(|&fl| grid.rank_of(fl).is_none())
            .fold(0.0f64, |m, fl| m.max(phi(&grid.ext_point(fl)).abs()));
    if info.residual > 1e-8 * data_norm.max(1e-300) {
        return Err(Error::Solver(format!(
            "oscillatory solve residual {:.3e} exceeds 1e-8 of the data norm {data_norm:.3e}",
            info.residual
        )));
    }
    Ok((DomainField::from_parts(grid, |x| phi(x), &u)?, info))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveMethod {
    /// Direct linear solve when the affine fit is within its residual
    /// tolerance, damped Picard otherwise.
    Auto,
    AffineDirect,
    Picard,
}

#[derive(Debug, Clone)]
pub struct EffectiveSolveInfo {
    pub method: &'static str,
    pub residual: f64,
    pub iterations: usize,
    /// Range of `I[u]` realized by the solution on the interior.
    pub i_span: (f64, f64),
}

/// Relative tolerance under which the tabulated operator is treated as
/// affine and the fixed point collapses to one linear solve.
pub const AFFINE_TRUST_TOL: f64 = 1e-6;

/// Solve the effective Dirichlet problem `u + Ibar(I[u]) = 0`, `u = phi`
/// outside. The jump functional uses the original measure's rule.
pub fn solve_effective(
    table: &EffectiveOperator,
    grid: &DomainGrid,
    rule: &QuadratureRule,
    phi: &Coefficient,
    omega: f64,
    method: EffectiveMethod,
) -> Result<(DomainField, EffectiveSolveInfo)> {
    let op = assemble_domain(grid, rule, &|x| phi(x), &|_| 1.0)?;
    let spread = {
        let ys: Vec<f64> = table.samples.iter().map(|p| p.1).collect();
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ys.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let affine_ok = table.affine.residual <= AFFINE_TRUST_TOL * spread.max(1e-9);
    let use_direct = match method {
        EffectiveMethod::Auto => affine_ok,
        EffectiveMethod::AffineDirect => {
            if !affine_ok {
                return Err(Error::Solver(format!(
                    "affine fit residual {:.3e} too large for the direct path",
                    table.affine.residual
                )));
            }
            true
        }
        EffectiveMethod::Picard => false,
    };

    let (u, info) = if use_direct {
        direct_effective(table, &op)?
    } else {
        picard_effective(table, &op, omega)?
    };

    // Post-check: the realized I[u] must be covered by the table.
    let i_values = op.apply(&u)?;
    let i_min = i_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let i_max = i_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = table.i_range();
    let span = (hi - lo).max(1e-12);
    if i_min < lo - 0.05 * span || i_max > hi + 0.05 * span {
        return Err(Error::RangeEscape(format!(
            "solution realizes I in [{i_min:.6e}, {i_max:.6e}] but the table covers \
             [{lo:.6e}, {hi:.6e}]; re-tabulate over the realized range"
        )));
    }
    let field = DomainField::from_parts(grid, |x| phi(x), &u)?;
    Ok((
        field,
        EffectiveSolveInfo {
            method: info.0,
            residual: info.1.residual,
            iterations: info.1.iterations,
            i_span: (i_min, i_max),
        },
    ))
}

fn direct_effective(
    table: &EffectiveOperator,
    op: &DiscreteOperator,
) -> Result<(Vec<f64>, (&'static str, SolveInfo))> {
    let s = table.affine.slope;
    if s >= 0.0 {
        return Err(Error::Solver(format!(
            "effective operator slope {s:.3e} is not negative; the effective \
             problem is not subelliptic"
        )));
    }
    let b = op.offset.as_ref().expect("domain operator has an offset");
    let n = op.n_rows;
    let mut diag = Vec::with_capacity(n);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = Vec::with_capacity(n);
    row_ptr.push(0);
    for i in 0..n {
        diag.push(1.0 - s * (op.row_coupling(i) + op.leak(i)));
        for (j, c) in op.row(i) {
            col_idx.push(j);
            vals.push(s * c);
        }
        row_ptr.push(col_idx.len());
        rhs.push(-table.affine.intercept - s * b[i]);
    }
    let sys = MonotoneSystem::new(diag, row_ptr, col_idx, vals)?;
    let factored = sys.factor()?;
    let (u, stats) = factored.solve(&rhs)?;
    Ok((
        u,
        (
            "affine-direct",
            SolveInfo {
                residual: stats.residual_inf,
                iterations: stats.iterations,
            },
        ),
    ))
}

fn picard_effective(
    table: &EffectiveOperator,
    op: &DiscreteOperator,
    omega: f64,
) -> Result<(Vec<f64>, (&'static str, SolveInfo))> {
    if !(0.0 < omega && omega <= 1.0) {
        return Err(Error::config("Picard damping omega must lie in (0, 1]"));
    }
    let n = op.n_rows;
    // Lipschitz bound of Ibar composed with the jump functional; the damping
    // is scaled so the iteration contracts for any monotone table.
    let lip_table = table
        .samples
        .windows(2)
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .fold(table.affine.slope.abs(), f64::max);
    let lip_op = 2.0 * op.max_row_magnitude();
    let damping = omega * 2.0 / (2.0 + lip_table * lip_op);

    let mut u = vec![0.0; n];
    let mut prev_delta = f64::INFINITY;
    let mut growth_streak = 0usize;
    let max_iter = 2_000_000usize;
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        let i_values = op.apply(&u)?;
        let mut delta = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            let (ibar, _) = table.eval(i_values[i]);
            let target = -ibar;
            let next = (1.0 - damping) * u[i] + damping * target;
            delta = delta.max((next - u[i]).abs());
            scale = scale.max(next.abs());
            u[i] = next;
        }
        if delta <= 1e-11 * scale.max(1e-6) {
            break;
        }
        if delta > prev_delta {
            growth_streak += 1;
            if growth_streak >= 10 {
                return Err(Error::Solver(format!(
                    "Picard iteration diverged after {iterations} rounds \
                     (increment grew 10 times in a row); retry with a smaller omega"
                )));
            }
        } else {
            growth_streak = 0;
        }
        prev_delta = delta;
        if iterations >= max_iter {
            return Err(Error::Solver(format!(
                "Picard iteration did not converge within {max_iter} rounds; \
                 last increment {delta:.3e}"
            )));
        }
    }
    // report the fixed-point residual of the effective equation
    let i_values = op.apply(&u)?;
    let residual = (0..n).fold(0.0f64, |m, i| {
        let (ibar, _) = table.eval(i_values[i]);
        m.max((u[i] + ibar).abs())
    });
    Ok((
        u,
        (
            "picard",
            SolveInfo {
                residual,
                iterations,
            },
        ),
    ))
}

/// Everything the convergence study needs, already resolved.
pub struct StudyInputs {
    pub density: LevyDensity,
    pub rescaled: RescaledDensity,
    pub beta: JumpMap,
    pub a: Coefficient,
    pub f: Coefficient,
    pub phi: Coefficient,
    /// Verified lower bound of `a`, the scale for the subellipticity gate.
    pub a0: f64,
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    /// Cells per dimension of the global domain grid.
    pub n_domain: usize,
    /// Points per dimension of the periodic cell grid.
    pub n_cell: usize,
    pub rule_params: RuleParams,
    pub cell_rule_params: RuleParams,
    pub eps_list: Vec<f64>,
    pub lambda_seq: Vec<f64>,
    pub osc_tol: f64,
    pub omega: f64,
    pub i_grid_points: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpsilonError {
    pub eps: f64,
    pub sup_error: f64,
    pub interior_margin: f64,
    pub solve_residual: f64,
    pub wall_ms: u64,
}

pub struct HomogenizationStudy {
    pub errors: Vec<EpsilonError>,
    pub effective_info: EffectiveSolveInfo,
    pub table: EffectiveOperator,
    pub theta: f64,
    pub subelliptic: bool,
    /// True when the error sequence strictly decreases along eps.
    pub monotone: bool,
    pub u_bar: DomainField,
    pub u_eps: Vec<DomainField>,
}

/// Interior margin excluding the boundary layer: `2 B1 R eps`, capped at a
/// quarter of the box width so a comparable core always remains.
pub fn interior_margin(b1: f64, r_outer: f64, eps: f64, width: f64) -> f64 {
    (2.0 * b1 * r_outer * eps).min(0.25 * width)
}

/// Run the full pipeline: quadrature for both measures, cell sweep,
/// effective solve, per-eps oscillatory solves, and the error table.
pub fn convergence_study(inputs: &StudyInputs) -> Result<HomogenizationStudy> {
    if inputs.eps_list.len() < 3 {
        return Err(Error::config("the study needs at least 3 eps values"));
    }
    if inputs.eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("eps values must be strictly decreasing"));
    }
    let eps_min = *inputs.eps_list.last().unwrap();
    let width = inputs.domain_hi[0] - inputs.domain_lo[0];
    if (inputs.n_domain as f64) < 8.0 / eps_min * width {
        return Err(Error::config(format!(
            "domain grid with {} cells cannot resolve eps = {eps_min}; need at least {}",
            inputs.n_domain,
            (8.0 / eps_min * width).ceil()
        )));
    }

    let rule = build_rule(&inputs.density, &inputs.beta, &inputs.rule_params)?;
    let cell_density = inputs.rescaled.as_levy(inputs.density.form);
    let cell_rule = build_rule(&cell_density, &inputs.beta, &inputs.cell_rule_params)?;

    let h = width / inputs.n_domain as f64;
    let collar = required_collar(&rule, h);
    let grid = DomainGrid::new(
        inputs.domain_lo.clone(),
        inputs.domain_hi.clone(),
        inputs.n_domain,
        collar,
    )?;

    let cell_grid = TorusGrid::new(grid.dim, inputs.n_cell)?;
    let cell_op = crate::operator::assemble_periodic(&cell_grid, &cell_rule)?;
    let a_cell: Vec<f64> = (0..cell_grid.len())
        .map(|i| (inputs.a)(&cell_grid.point(i)))
        .collect();
    let f_cell = PeriodicField::from_fn(&cell_grid, |y| (inputs.f)(y));

    // Crude first pass at the largest eps to size the I sweep.
    let raw_op = assemble_domain(&grid, &rule, &|x| (inputs.phi)(x), &|_| 1.0)?;
    let eps0 = inputs.eps_list[0];
    let (u0, _) = solve_epsilon(&grid, &rule, &inputs.a, &inputs.f, &inputs.phi, eps0)?;
    let i_crude = raw_op.apply(&u0.interior_values())?;
    let (mut i_lo, mut i_hi) = i_crude
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let pad = 0.75 * (i_hi - i_lo) + 0.1 * (1.0 + i_hi.abs().max(i_lo.abs()));
    i_lo -= pad;
    i_hi += pad;

    let mut table = tabulate_range(inputs, &a_cell, &f_cell, &cell_op, i_lo, i_hi)?;
    let (theta, subelliptic) = table.check_subellipticity(inputs.a0);

    // Effective solve, re-tabulating once if the realized I escapes.
    let mut effective = solve_effective(
        &table,
        &grid,
        &rule,
        &inputs.phi,
        inputs.omega,
        EffectiveMethod::Auto,
    );
    for _ in 0..2 {
        match &effective {
            Err(Error::RangeEscape(_)) => {
                let grow = 0.5 * (i_hi - i_lo);
                i_lo -= grow;
                i_hi += grow;
                table = tabulate_range(inputs, &a_cell, &f_cell, &cell_op, i_lo, i_hi)?;
                effective = solve_effective(
                    &table,
                    &grid,
                    &rule,
                    &inputs.phi,
                    inputs.omega,
                    EffectiveMethod::Auto,
                );
            }
            _ => break,
        }
    }
    let (u_bar, effective_info) = effective?;

    // Per-eps oscillatory solves, deterministic aggregation order.
    let solves: Vec<Result<(DomainField, SolveInfo, u64)>> = inputs
        .eps_list
        .par_iter()
        .map(|&eps| {
            let start = Instant::now();
            let (u, info) = solve_epsilon(&grid, &rule, &inputs.a, &inputs.f, &inputs.phi, eps)?;
            Ok((u, info, start.elapsed().as_millis() as u64))
        })
        .collect();

    let mut errors = Vec::with_capacity(inputs.eps_list.len());
    let mut u_eps = Vec::with_capacity(inputs.eps_list.len());
    for (&eps, solved) in inputs.eps_list.iter().zip(solves) {
        let (u, info, wall_ms) = solved?;
        let margin = interior_margin(inputs.beta.bound_b1, rule.outer_cutoff, eps, width);
        let sup_error = u.interior_sup_difference(&u_bar, margin);
        errors.push(EpsilonError {
            eps,
            sup_error,
            interior_margin: margin,
            solve_residual: info.residual,
            wall_ms,
        });
        u_eps.push(u);
    }
    let monotone = errors.windows(2).all(|w| w[1].sup_error < w[0].sup_error);

    Ok(HomogenizationStudy {
        errors,
        effective_info,
        table,
        theta,
        subelliptic,
        monotone,
        u_bar,
        u_eps,
    })
}

fn tabulate_range(
    inputs: &StudyInputs,
    a_cell: &[f64],
    f_cell: &PeriodicField,
    cell_op: &DiscreteOperator,
    i_lo: f64,
    i_hi: f64,
) -> Result<EffectiveOperator> {
    let m = inputs.i_grid_points.max(5);
    let i_grid: Vec<f64> = (0..m)
        .map(|k| i_lo + (i_hi - i_lo) * k as f64 / (m - 1) as f64)
        .collect();
    crate::effective::tabulate(
        a_cell,
        f_cell,
        cell_op,
        &i_grid,
        &inputs.lambda_seq,
        inputs.osc_tol,
    )
}
