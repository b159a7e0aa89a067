//! The effective nonlocal operator, tabulated from cell problems.
//!
//! For frozen macroscopic data `I` the cell problem with source
//! `a(y) I + f(y)` has an ergodic constant `d_I`; the homogenized operator is
//! `Ibar(I) = -d_I`. For linear problems `d_I` is affine in `I`, and the
//! Dirichlet fixed point evaluates `Ibar` thousands of times, so the sweep is
//! tabulated once and interpolated.
//!
//! The discount at which `d` is read off is shared across the whole sweep:
//! it is accepted on the endpoint problems (the worst oscillations) and then
//! reused, so the exact affinity of the discrete solves in `I` survives into
//! the table instead of being blurred by per-`I` stopping.

use rayon::prelude::*;

use crate::cell::{ergodic_constant, ergodic_constant_max, solve_discounted, solve_discounted_max};
use crate::error::{Error, Result};
use crate::grid::PeriodicField;
use crate::operator::DiscreteOperator;

#[derive(Debug, Clone, serde::Serialize)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Max absolute deviation of the samples from the fit.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct EffectiveOperator {
    /// `(I_j, Ibar_j)` sorted by `I`.
    pub samples: Vec<(f64, f64)>,
    pub affine: AffineFit,
    /// `min_j -(Ibar_{j+1} - Ibar_j) / (I_{j+1} - I_j)`, the realized
    /// subellipticity constant.
    pub theta: f64,
    /// Oscillation of `lambda v_lambda` for each sample at the shared
    /// discount; the error bar on each `Ibar_j`.
    pub oscillations: Vec<f64>,
    /// Discount the table was read at.
    pub lambda_used: f64,
    /// False when the endpoint runs exhausted the sequence above `osc_tol`.
    pub converged: bool,
}

fn affine_least_squares(samples: &[(f64, f64)]) -> AffineFit {
    let n = samples.len() as f64;
    let sx: f64 = samples.iter().map(|p| p.0).sum();
    let sy: f64 = samples.iter().map(|p| p.1).sum();
    let sxx: f64 = samples.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = samples.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = samples
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0f64, f64::max);
    AffineFit {
        intercept,
        slope,
        residual,
    }
}

fn min_consecutive_theta(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(2)
        .map(|w| -(w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .fold(f64::INFINITY, f64::min)
}

fn validate_i_grid(i_grid: &[f64]) -> Result<()> {
    if i_grid.len() < 5 {
        return Err(Error::config("the I sweep needs at least 5 points"));
    }
    if i_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("the I grid must be strictly increasing"));
    }
    Ok(())
}

/// Sweep the cell problem over `I`, recording `Ibar(I) = -d_I`.
pub fn tabulate(
    a: &[f64],
    f: &PeriodicField,
    cell_op: &DiscreteOperator,
    i_grid: &[f64],
    lambda_seq: &[f64],
    osc_tol: f64,
) -> Result<EffectiveOperator> {
    validate_i_grid(i_grid)?;
    let source = |i_value: f64| -> Result<PeriodicField> {
        let values: Vec<f64> = f
            .values
            .iter()
            .zip(a)
            .map(|(fv, av)| av * i_value + fv)
            .collect();
        PeriodicField::new(f.grid.clone(), values)
    };

    // Accept a discount on the endpoint problems, whose sources have the
    // largest fluctuation, then read the whole sweep at that discount.
    let mut lambda_used = f64::INFINITY;
    let mut converged = true;
    for &endpoint in &[i_grid[0], *i_grid.last().unwrap()] {
        let f0 = source(endpoint)?;
        let reference = ergodic_constant(a, &f0, cell_op, lambda_seq, osc_tol)
            .map_err(|e| Error::Solver(format!("I sweep failed at I = {endpoint}: {e}")))?;
        let accepted = reference.trace.last().unwrap().lambda;
        lambda_used = lambda_used.min(accepted);
        converged &= reference.converged;
    }

    let solves: Vec<Result<(f64, f64)>> = i_grid
        .par_iter()
        .map(|&i_value| {
            let f0 = source(i_value)?;
            let s = solve_discounted(lambda_used, a, &f0, cell_op)
                .map_err(|e| Error::Solver(format!("I sweep failed at I = {i_value}: {e}")))?;
            let m: Vec<f64> = s.v.values.iter().map(|v| lambda_used * v).collect();
            let d = m.iter().sum::<f64>() / m.len() as f64;
            let osc = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - m.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok((d, osc))
        })
        .collect();

    let mut samples = Vec::with_capacity(i_grid.len());
    let mut oscillations = Vec::with_capacity(i_grid.len());
    for (&i_value, solved) in i_grid.iter().zip(solves) {
        let (d, osc) = solved?;
        samples.push((i_value, -d));
        oscillations.push(osc);
    }

    let affine = affine_least_squares(&samples);
    let theta = min_consecutive_theta(&samples);
    Ok(EffectiveOperator {
        samples,
        affine,
        theta,
        oscillations,
        lambda_used,
        converged,
    })
}

impl EffectiveOperator {
    pub fn i_range(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Piecewise-linear interpolation inside the sampled range, affine
    /// extrapolation (flagged) outside.
    pub fn eval(&self, i_value: f64) -> (f64, bool) {
        let (lo, hi) = self.i_range();
        if i_value < lo || i_value > hi {
            return (self.affine.intercept + self.affine.slope * i_value, true);
        }
        let pos = self
            .samples
            .partition_point(|&(x, _)| x <= i_value)
            .min(self.samples.len() - 1)
            .max(1);
        let (x0, y0) = self.samples[pos - 1];
        let (x1, y1) = self.samples[pos];
        if i_value == x0 {
            return (y0, false);
        }
        if i_value == x1 {
            return (y1, false);
        }
        let t = (i_value - x0) / (x1 - x0);
        (y0 + t * (y1 - y0), false)
    }

    /// Strict decrease gate: every consecutive slope must be at most
    /// `-a0 / 2`. Returns the realized constant alongside the verdict.
    pub fn check_subellipticity(&self, a0: f64) -> (f64, bool) {
        let theta = self.theta;
        (theta, theta >= a0 / 2.0 && theta.is_finite())
    }
}

/// Two-parameter effective operator for the coupled max problem: the cell
/// problem carries one frozen datum per jump structure. Tabulated on a
/// coarse rectangle, evaluated bilinearly.
#[derive(Debug, Clone)]
pub struct EffectiveOperatorPair {
    pub i1_grid: Vec<f64>,
    pub i2_grid: Vec<f64>,
    /// Row-major `Ibar(I1_j, I2_k) = -d`, rows indexed by `i1`.
    pub table: Vec<f64>,
    pub lambda_used: f64,
    pub converged: bool,
}

pub fn tabulate_pair(
    a: &[f64],
    f: &PeriodicField,
    ops: &[&DiscreteOperator],
    i1_grid: &[f64],
    i2_grid: &[f64],
    lambda_seq: &[f64],
    osc_tol: f64,
) -> Result<EffectiveOperatorPair> {
    if i1_grid.len() < 2 || i2_grid.len() < 2 {
        return Err(Error::config("pair tabulation needs at least a 2x2 grid"));
    }
    if i1_grid.windows(2).any(|w| w[1] <= w[0]) || i2_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("pair grids must be strictly increasing"));
    }

    let mut lambda_used = f64::INFINITY;
    let mut converged = true;
    for &i1 in &[i1_grid[0], *i1_grid.last().unwrap()] {
        for &i2 in &[i2_grid[0], *i2_grid.last().unwrap()] {
            let r = ergodic_constant_max(a, f, ops, &[i1, i2], lambda_seq, osc_tol)
                .map_err(|e| {
                    Error::Solver(format!("pair sweep failed at (I1, I2) = ({i1}, {i2}): {e}"))
                })?;
            lambda_used = lambda_used.min(r.trace.last().unwrap().lambda);
            converged &= r.converged;
        }
    }

    let pairs: Vec<(usize, usize)> = (0..i1_grid.len())
        .flat_map(|j| (0..i2_grid.len()).map(move |k| (j, k)))
        .collect();
    let entries: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let s = solve_discounted_max(lambda_used, a, f, ops, &[i1_grid[j], i2_grid[k]])?;
            let d = s.v.values.iter().map(|v| lambda_used * v).sum::<f64>()
                / s.v.values.len() as f64;
            Ok(-d)
        })
        .collect();
    let mut table = Vec::with_capacity(pairs.len());
    for e in entries {
        table.push(e?);
    }
    Ok(EffectiveOperatorPair {
        i1_grid: i1_grid.to_vec(),
        i2_grid: i2_grid.to_vec(),
        table,
        lambda_used,
        converged,
    })
}

impl EffectiveOperatorPair {
    pub fn eval(&self, i1: f64, i2: f64) -> (f64, bool) {
        let clamp = |grid: &[f64], v: f64| -> (usize, f64, bool) {
            let lo = grid[0];
            let hi = grid[grid.len() - 1];
            let out = v < lo || v > hi;
            let v = v.clamp(lo, hi);
            let pos = grid.partition_point(|&x| x <= v).clamp(1, grid.len() - 1);
            let t = (v - grid[pos - 1]) / (grid[pos] - grid[pos - 1]);
            (pos, t, out)
        };
        let (p1, t1, out1) = clamp(&self.i1_grid, i1);
        let (p2, t2, out2) = clamp(&self.i2_grid, i2);
        let n2 = self.i2_grid.len();
        let at = |j: usize, k: usize| self.table[j * n2 + k];
        let v00 = at(p1 - 1, p2 - 1);
        let v01 = at(p1 - 1, p2);
        let v10 = at(p1, p2 - 1);
        let v11 = at(p1, p2);
        let value = (1.0 - t1) * ((1.0 - t2) * v00 + t2 * v01) + t1 * ((1.0 - t2) * v10 + t2 * v11);
        (value, out1 || out2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::default_lambda_seq;
    use crate::grid::TorusGrid;
    use crate::measures::{builtin_example, BuiltinMeasure};
    use crate::operator::assemble_periodic;
    use crate::quadrature::{build_rule, RuleParams};

    fn cell_op(n: usize) -> DiscreteOperator {
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 1,
            alpha: 1.5,
            decay: 1.0,
        })
        .unwrap();
        let rule = build_rule(&q, &beta, &RuleParams::new(1e-2, 4.0, 32)).unwrap();
        let grid = TorusGrid::new(1, n).unwrap();
        assemble_periodic(&grid, &rule).unwrap()
    }

    fn i_grid() -> Vec<f64> {
        vec![-2.0, -1.0, 0.0, 1.0, 2.0]
    }

    #[test]
    fn unit_coefficient_gives_slope_minus_one() {
        let op = cell_op(128);
        let grid = TorusGrid::new(1, 128).unwrap();
        let f = PeriodicField::from_fn(&grid, |y| (std::f64::consts::TAU * y[0]).sin());
        let a = vec![1.0; 128];
        let table = tabulate(&a, &f, &op, &i_grid(), &default_lambda_seq(), 1e-4).unwrap();
        assert!(
            (table.affine.slope + 1.0).abs() < 1e-6,
            "slope {}",
            table.affine.slope
        );
        assert!(table.affine.intercept.abs() < 1e-6);
        assert!(table.affine.residual < 1e-6);
        let (theta, pass) = table.check_subellipticity(1.0);
        assert!(pass);
        assert!((theta - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_source_pins_zero() {
        let op = cell_op(64);
        let grid = TorusGrid::new(1, 64).unwrap();
        let f = PeriodicField::constant(&grid, 0.0);
        let a: Vec<f64> = (0..64)
            .map(|i| 2.0 + (std::f64::consts::TAU * i as f64 / 64.0).cos())
            .collect();
        let table = tabulate(&a, &f, &op, &i_grid(), &default_lambda_seq(), 1e-4).unwrap();
        let (v, extrapolated) = table.eval(0.0);
        assert!(!extrapolated);
        assert!(v.abs() < 1e-12, "Ibar(0) = {v}");
    }

    #[test]
    fn oscillating_coefficient_brackets_the_slope() {
        // a(y) = 2 + cos(2 pi y): the effective slope -cbar must sit between
        // the constant-coefficient slopes at a = 1 and a = 3, checked by
        // running those constant problems through the same machinery.
        let op = cell_op(128);
        let grid = TorusGrid::new(1, 128).unwrap();
        let f = PeriodicField::constant(&grid, 0.0);
        let a: Vec<f64> = (0..128)
            .map(|i| 2.0 + (std::f64::consts::TAU * i as f64 / 128.0).cos())
            .collect();
        let table = tabulate(&a, &f, &op, &i_grid(), &default_lambda_seq(), 1e-4).unwrap();
        assert!(table.affine.residual < 1e-6, "residual {}", table.affine.residual);
        let cbar = -table.affine.slope;

        let lo = tabulate(
            &vec![1.0; 128],
            &f,
            &op,
            &i_grid(),
            &default_lambda_seq(),
            1e-4,
        )
        .unwrap();
        let hi = tabulate(
            &vec![3.0; 128],
            &f,
            &op,
            &i_grid(),
            &default_lambda_seq(),
            1e-4,
        )
        .unwrap();
        let c_lo = -lo.affine.slope;
        let c_hi = -hi.affine.slope;
        assert!(
            c_lo - 1e-9 <= cbar && cbar <= c_hi + 1e-9,
            "cbar {cbar} outside [{c_lo}, {c_hi}]"
        );
        let (theta, pass) = table.check_subellipticity(1.0);
        assert!(pass, "theta {theta}");
        assert!(theta >= 1.0 - 1e-6);
    }

    #[test]
    fn shifting_the_source_shifts_the_table() {
        let op = cell_op(64);
        let grid = TorusGrid::new(1, 64).unwrap();
        let f = PeriodicField::from_fn(&grid, |y| (std::f64::consts::TAU * y[0]).sin());
        let a = vec![1.0; 64];
        let base = tabulate(&a, &f, &op, &i_grid(), &default_lambda_seq(), 1e-4).unwrap();
        let shifted_f = PeriodicField::new(
            f.grid.clone(),
            f.values.iter().map(|v| v + 0.4).collect(),
        )
        .unwrap();
        let shifted = tabulate(&a, &shifted_f, &op, &i_grid(), &default_lambda_seq(), 1e-4).unwrap();
        for (b, s) in base.samples.iter().zip(&shifted.samples) {
            assert!(
                (s.1 - (b.1 - 0.4)).abs() < 1e-10,
                "shift covariance violated: {} vs {}",
                s.1,
                b.1 - 0.4
            );
        }
    }

    #[test]
    fn eval_interpolates_and_extrapolates() {
        let samples = vec![(-1.0, 2.0), (0.0, 1.0), (1.0, -0.5), (2.0, -2.0), (3.0, -3.5)];
        let table = EffectiveOperator {
            affine: affine_least_squares(&samples),
            theta: min_consecutive_theta(&samples),
            samples,
            oscillations: vec![0.0; 5],
            lambda_used: 1e-3,
            converged: true,
        };
        for &(x, y) in &table.samples {
            let (v, ex) = table.eval(x);
            assert_eq!(v, y);
            assert!(!ex);
        }
        let (mid, ex) = table.eval(0.5);
        assert_eq!(mid, 0.25);
        assert!(!ex);
        let (_, ex) = table.eval(10.0);
        assert!(ex);
    }

    #[test]
    fn non_monotone_table_fails_the_gate() {
        let samples = vec![(0.0, 0.0), (1.0, -1.0), (2.0, -0.5), (3.0, -2.0), (4.0, -3.0)];
        let table = EffectiveOperator {
            affine: affine_least_squares(&samples),
            theta: min_consecutive_theta(&samples),
            samples,
            oscillations: vec![0.0; 5],
            lambda_used: 1e-3,
            converged: true,
        };
        let (theta, pass) = table.check_subellipticity(1.0);
        assert!(!pass);
        assert!(theta < 0.0);
    }

    #[test]
    fn pair_table_on_identical_operators_matches_scalar() {
        let op = cell_op(32);
        let grid = TorusGrid::new(1, 32).unwrap();
        let f = PeriodicField::from_fn(&grid, |y| (std::f64::consts::TAU * y[0]).sin());
        let a = vec![1.0; 32];
        let coarse = vec![-1.0, 0.0, 1.0];
        let pair = tabulate_pair(
            &a,
            &f,
            &[&op, &op],
            &coarse,
            &coarse,
            &default_lambda_seq(),
            1e-3,
        )
        .unwrap();
        // identical operators with equal data: max degenerates, and on the
        // diagonal I1 = I2 the pair table must match the scalar one
        let scalar = tabulate(
            &a,
            &f,
            &op,
            &[-1.0, -0.5, 0.0, 0.5, 1.0],
            &default_lambda_seq(),
            1e-3,
        )
        .unwrap();
        for &iv in &coarse {
            let (pv, _) = pair.eval(iv, iv);
            let (sv, _) = scalar.eval(iv);
            assert!(
                (pv - sv).abs() < 2.0 * (pair.lambda_used + scalar.lambda_used),
                "pair {pv} vs scalar {sv} at I = {iv}"
            );
        }
    }
}
