//! Monotone assembly of the discrete jump operator.
//!
//! `L[v](y) = sum_j w_j [v(y + beta(z_j)) - v(y)] - <c, grad v(y)>`
//!
//! Jump targets are resolved by multilinear interpolation (nonnegative
//! weights summing to one), the compensator drift `c` by per-component upwind
//! first differences. Both choices keep every off-diagonal coupling
//! nonnegative, which is what the discrete comparison and maximum principles
//! hang on. Operators are stored in difference form, so constants are
//! annihilated exactly in floating point.
//!
//! On the torus the compensator runs over all jumps (the cell-problem form);
//! on a bounded domain it runs over `|z| <= 1` only (the oscillatory form),
//! and jump targets landing in the exterior collar contribute Dirichlet data
//! to an affine offset instead of matrix entries.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{DomainGrid, TorusGrid};
use crate::measures::KernelForm;
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OperatorKind {
    Periodic,
    Domain,
}

#[derive(Debug, Clone)]
pub struct OperatorMeta {
    pub kind: OperatorKind,
    pub form: KernelForm,
    /// Compensator drift actually discretized (None for gamma = 1).
    pub drift: Option<Vec<f64>>,
    pub rule_mass: f64,
    pub inner_error_bound: f64,
    pub tail_error_bound: f64,
}

/// Sparse monotone operator in difference form. The application
/// `(A v)_i = sum_j c_ij (v_j - v_i) - leak_i v_i + offset_i` keeps row sums
/// of the implied standard matrix exactly zero on the torus (`leak = 0`).
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub n_rows: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    coeffs: Vec<f64>,
    /// Mass coupling each row to exterior data (domain case; zero on the torus).
    leak: Vec<f64>,
    /// Exterior-data contribution (domain case only).
    pub offset: Option<Vec<f64>>,
    pub meta: OperatorMeta,
}

impl DiscreteOperator {
    /// `A v` (+ offset in the domain case).
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_rows {
            return Err(Error::ShapeMismatch(format!(
                "operator over {} unknowns applied to a field of length {}",
                self.n_rows,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let vi = v[i];
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.coeffs[k] * (v[self.col_idx[k]] - vi);
            }
            acc -= self.leak[i] * vi;
            if let Some(b) = &self.offset {
                acc += b[i];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Row iteration over off-diagonal couplings `(col, coeff)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.coeffs[k]))
    }

    /// Total off-diagonal coupling of a row.
    pub fn row_coupling(&self, i: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .map(|k| self.coeffs[k])
            .sum()
    }

    pub fn leak(&self, i: usize) -> f64 {
        self.leak[i]
    }

    /// Diagonal of the implied standard matrix.
    pub fn diagonal(&self, i: usize) -> f64 {
        -self.row_coupling(i) - self.leak[i]
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    /// Largest row magnitude `sum_j c_ij + leak_i`; an upper bound for the
    /// operator norm up to a factor of 2.
    pub fn max_row_magnitude(&self) -> f64 {
        (0..self.n_rows).fold(0.0f64, |m, i| m.max(self.row_coupling(i) + self.leak[i]))
    }

    /// Dump `(row, col, value)` triplets of the standard matrix.
    pub fn write_triplets<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "row,col,value")?;
        for i in 0..self.n_rows {
            writeln!(out, "{i},{i},{:.17e}", self.diagonal(i))?;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(out, "{i},{},{:.17e}", self.col_idx[k], self.coeffs[k])?;
            }
        }
        Ok(())
    }
}

struct CsrBuilder {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    coeffs: Vec<f64>,
}

impl CsrBuilder {
    fn new(n_rows: usize) -> CsrBuilder {
        CsrBuilder {
            row_ptr: Vec::with_capacity(n_rows + 1),
            col_idx: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    /// Append a row given as (col -> coeff) pairs; merges duplicates and
    /// sorts by column for deterministic layout.
    fn push_row(&mut self, entries: &mut Vec<(usize, f64)>) {
        if self.row_ptr.is_empty() {
            self.row_ptr.push(0);
        }
        entries.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for &(c, v) in entries.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        for (c, v) in merged {
            if v != 0.0 {
                self.col_idx.push(c);
                self.coeffs.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
        entries.clear();
    }
}

/// Interpolation template of one jump: the corner offsets of the containing
/// cell with their multilinear weights.
struct JumpTemplate {
    corners: Vec<(Vec<isize>, f64)>,
    weight: f64,
}

fn jump_template(jump: &[f64], weight: f64, h: f64) -> JumpTemplate {
    let dim = jump.len();
    let mut base = vec![0isize; dim];
    let mut frac = vec![0f64; dim];
    for d in 0..dim {
        let s = jump[d] / h;
        let k = s.floor();
        base[d] = k as isize;
        frac[d] = s - k;
    }
    let mut corners = Vec::with_capacity(1 << dim);
    for bits in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut off = base.clone();
        for d in 0..dim {
            if bits & (1 << d) != 0 {
                w *= frac[d];
                off[d] += 1;
            } else {
                w *= 1.0 - frac[d];
            }
        }
        if w != 0.0 {
            corners.push((off, w));
        }
    }
    JumpTemplate { corners, weight }
}

/// Per-component upwind template for `-<c, grad v>`: a positive component
/// draws on the backward neighbor, a negative one on the forward neighbor,
/// keeping the off-diagonal coupling nonnegative.
fn upwind_entries(drift: &[f64], h: f64) -> Vec<(usize, isize, f64)> {
    let mut entries = Vec::new();
    for (d, &c) in drift.iter().enumerate() {
        if c > 0.0 {
            entries.push((d, -1, c / h));
        } else if c < 0.0 {
            entries.push((d, 1, -c / h));
        }
    }
    entries
}

/// Assemble the periodic jump operator for a cell problem. Constant
/// coefficients make it a convolution: one stencil shared by every row.
pub fn assemble_periodic(grid: &TorusGrid, rule: &QuadratureRule) -> Result<DiscreteOperator> {
    if grid.n < 8 {
        return Err(Error::config("periodic assembly needs n >= 8 per dimension"));
    }
    let dim = grid.dim;
    if rule.jumps.first().map_or(0, |j| j.len()) != dim {
        return Err(Error::ShapeMismatch(format!(
            "rule jumps live in dimension {}, grid has dimension {dim}",
            rule.jumps.first().map_or(0, |j| j.len())
        )));
    }
    let h = grid.spacing();
    let n = grid.n as isize;

    // Stencil over wrapped offsets, keyed by the offset's flat index.
    let mut stencil: HashMap<usize, f64> = HashMap::new();
    let mut diag_mass = 0.0f64; // accumulated coefficient at offset zero
    let wrap_flat = |off: &[isize]| -> usize {
        let mut flat = 0usize;
        for d in 0..dim {
            flat = flat * grid.n + off[d].rem_euclid(n) as usize;
        }
        flat
    };

    for (jump, &w) in rule.jumps.iter().zip(&rule.weights) {
        let tpl = jump_template(jump, w, h);
        for (off, cw) in &tpl.corners {
            let key = wrap_flat(off);
            if key == 0 {
                diag_mass += w * cw;
            } else {
                *stencil.entry(key).or_insert(0.0) += w * cw;
            }
        }
        diag_mass -= w;
    }

    let drift = match rule.form {
        KernelForm::Gamma2 => {
            // Cell problems compensate over every jump, not only |z| <= 1.
            let c = rule
                .full_drift()
                .ok_or_else(|| Error::OperatorConsistency("gamma-2 rule lacks drift".into()))?;
            for (d, step, coeff) in upwind_entries(&c, h) {
                let mut off = vec![0isize; dim];
                off[d] = step;
                let key = wrap_flat(&off);
                if key == 0 {
                    return Err(Error::OperatorConsistency(
                        "upwind neighbor wrapped onto the diagonal; grid too coarse".into(),
                    ));
                }
                *stencil.entry(key).or_insert(0.0) += coeff;
                diag_mass -= coeff;
            }
            Some(c)
        }
        KernelForm::Gamma1 => None,
    };

    // Internal consistency: the accumulated diagonal must cancel the
    // off-diagonal mass (row sum zero). The difference form then enforces the
    // cancellation exactly.
    let off_mass: f64 = stencil.values().sum();
    let magnitude: f64 = stencil.values().map(|v| v.abs()).sum::<f64>() + diag_mass.abs();
    if (diag_mass + off_mass).abs() > 1e-10 * magnitude.max(1e-300) {
        return Err(Error::OperatorConsistency(format!(
            "stencil row sum {:.3e} exceeds tolerance for magnitude {:.3e}",
            diag_mass + off_mass,
            magnitude
        )));
    }
    for (&key, &v) in &stencil {
        if v < 0.0 {
            return Err(Error::OperatorConsistency(format!(
                "negative off-diagonal stencil entry {v:.3e} at offset {key}"
            )));
        }
    }

    // Materialize rows by shifting the stencil around the torus.
    let mut offsets: Vec<(Vec<usize>, f64)> = stencil
        .iter()
        .map(|(&key, &v)| {
            let mut idx = vec![0usize; dim];
            let mut rem = key;
            for d in (0..dim).rev() {
                idx[d] = rem % grid.n;
                rem /= grid.n;
            }
            (idx, v)
        })
        .collect();
    offsets.sort_by(|a, b| a.0.cmp(&b.0));

    let len = grid.len();
    let mut builder = CsrBuilder::new(len);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(offsets.len());
    for i in 0..len {
        let idx = grid.multi_index(i);
        for (off, v) in &offsets {
            let mut col = 0usize;
            for d in 0..dim {
                let k = idx[d] + off[d];
                col = col * grid.n + if k >= grid.n { k - grid.n } else { k };
            }
            entries.push((col, *v));
        }
        builder.push_row(&mut entries);
    }

    Ok(DiscreteOperator {
        n_rows: len,
        row_ptr: builder.row_ptr,
        col_idx: builder.col_idx,
        coeffs: builder.coeffs,
        leak: vec![0.0; len],
        offset: None,
        meta: OperatorMeta {
            kind: OperatorKind::Periodic,
            form: rule.form,
            drift,
            rule_mass: rule.total_mass(),
            inner_error_bound: rule.inner_error_bound,
            tail_error_bound: rule.tail_error_bound,
        },
    })
}

/// Collar layers needed so every jump target of the rule stays inside the
/// extended grid's interpolation hull.
pub fn required_collar(rule: &QuadratureRule, h: f64) -> usize {
    let max_reach = rule
        .jumps
        .iter()
        .flat_map(|j| j.iter().map(|b| b.abs()))
        .fold(0.0f64, f64::max);
    (max_reach / h).ceil() as usize + 1
}

/// Assemble the Dirichlet-problem operator on a bounded box. Rows are scaled
/// by `a_scaled(x_i)`; pass a constant 1 for the effective problem. Jump
/// targets in the collar contribute `phi` samples to the affine offset.
pub fn assemble_domain(
    grid: &DomainGrid,
    rule: &QuadratureRule,
    phi: &dyn Fn(&[f64]) -> f64,
    a_scaled: &dyn Fn(&[f64]) -> f64,
) -> Result<DiscreteOperator> {
    let dim = grid.dim;
    if rule.jumps.first().map_or(0, |j| j.len()) != dim {
        return Err(Error::ShapeMismatch(format!(
            "rule jumps live in dimension {}, domain has dimension {dim}",
            rule.jumps.first().map_or(0, |j| j.len())
        )));
    }
    let h = grid.spacing();
    let needed = required_collar(rule, h);
    if grid.collar < needed {
        return Err(Error::config(format!(
            "collar of {} layers is too small: jump targets need {} layers ({} in physical width)",
            grid.collar,
            needed,
            needed as f64 * h
        )));
    }

    // Oscillatory problems compensate only inside the unit ball.
    let drift = match rule.form {
        KernelForm::Gamma2 => rule.drift.clone(),
        KernelForm::Gamma1 => None,
    };

    let templates: Vec<JumpTemplate> = rule
        .jumps
        .iter()
        .zip(&rule.weights)
        .map(|(j, &w)| jump_template(j, w, h))
        .collect();
    let upwind = drift.as_deref().map(|c| upwind_entries(c, h)).unwrap_or_default();

    // Exterior Dirichlet data, sampled once.
    let ext_len = grid.ext_len();
    let mut phi_values = vec![0.0; ext_len];
    for flat in 0..ext_len {
        if grid.rank_of(flat).is_none() {
            phi_values[flat] = phi(&grid.ext_point(flat));
        }
    }

    let n_unknowns = grid.interior_len();
    let e = grid.ext_per_dim() as isize;
    let mut builder = CsrBuilder::new(n_unknowns);
    let mut leak = vec![0.0; n_unknowns];
    let mut offset = vec![0.0; n_unknowns];
    let mut entries: Vec<(usize, f64)> = Vec::new();

    for (rank, &flat) in grid.interior().iter().enumerate() {
        let idx = grid.ext_multi_index(flat);
        let a_i = a_scaled(&grid.ext_point(flat));
        if a_i <= 0.0 {
            return Err(Error::config(format!(
                "coefficient a must be positive, got {a_i} at row {rank}"
            )));
        }
        let resolve = |target_idx: &[isize],
                           coeff: f64,
                           entries: &mut Vec<(usize, f64)>,
                           leak_i: &mut f64,
                           offset_i: &mut f64|
         -> Result<()> {
            let mut col_flat = 0usize;
            for d in 0..dim {
                let k = target_idx[d];
                if k < 0 || k >= e {
                    return Err(Error::OperatorConsistency(
                        "jump target escaped the extended grid despite collar validation".into(),
                    ));
                }
                col_flat = col_flat * grid.ext_per_dim() + k as usize;
            }
            match grid.rank_of(col_flat) {
                // A corner landing on the row's own point contributes
                // c (v_i - v_i) = 0; the difference form's implied diagonal
                // already accounts for it.
                Some(r) if r == rank => Ok(()),
                Some(r) => {
                    entries.push((r, coeff));
                    Ok(())
                }
                None => {
                    *leak_i += coeff;
                    *offset_i += coeff * phi_values[col_flat];
                    Ok(())
                }
            }
        };

        // Jump part: sum_j w_j [interp v(x + beta(z_j)) - v(x)].
        // In difference form each off-diagonal corner coefficient c produces
        // c (v_col - v_i); corners on exterior points leave (-c v_i + c phi)
        // behind, i.e. leak and offset.
        let mut leak_i = 0.0;
        let mut offset_i = 0.0;
        let mut target = vec![0isize; dim];
        for tpl in &templates {
            for (off, cw) in &tpl.corners {
                for d in 0..dim {
                    target[d] = idx[d] as isize + off[d];
                }
                resolve(
                    &target,
                    tpl.weight * cw,
                    &mut entries,
                    &mut leak_i,
                    &mut offset_i,
                )?;
            }
        }
        for &(d, step, coeff) in &upwind {
            for (dd, t) in target.iter_mut().enumerate() {
                *t = idx[dd] as isize;
            }
            target[d] += step;
            resolve(&target, coeff, &mut entries, &mut leak_i, &mut offset_i)?;
        }

        // Scale the whole row by a(x_i / eps).
        for entry in entries.iter_mut() {
            entry.1 *= a_i;
        }
        leak[rank] = leak_i * a_i;
        offset[rank] = offset_i * a_i;
        builder.push_row(&mut entries);
    }

    Ok(DiscreteOperator {
        n_rows: n_unknowns,
        row_ptr: builder.row_ptr,
        col_idx: builder.col_idx,
        coeffs: builder.coeffs,
        leak,
        offset: Some(offset),
        meta: OperatorMeta {
            kind: OperatorKind::Domain,
            form: rule.form,
            drift,
            rule_mass: rule.total_mass(),
            inner_error_bound: rule.inner_error_bound,
            tail_error_bound: rule.tail_error_bound,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicField;
    use crate::measures::{builtin_example, BuiltinMeasure, JumpMap, LevyDensity, Support};
    use crate::quadrature::{build_rule, RuleParams};
    use rand::Rng;
    use rand::SeedableRng;

    fn symmetric_rule_1d(alpha: f64) -> QuadratureRule {
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 1,
            alpha,
            decay: 1.0,
        })
        .unwrap();
        build_rule(&q, &beta, &RuleParams::new(1e-3, 4.0, 32)).unwrap()
    }

    fn one_sided_rule_1d(alpha: f64) -> QuadratureRule {
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex1 { dim: 1, alpha }).unwrap();
        build_rule(&q, &beta, &RuleParams::new(1e-3, 4.0, 32)).unwrap()
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let op = assemble_periodic(&grid, &symmetric_rule_1d(1.5)).unwrap();
        let v = vec![3.7; grid.len()];
        let out = op.apply(&v).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn off_diagonals_nonnegative_and_diag_nonpositive() {
        let grid = TorusGrid::new(1, 64).unwrap();
        for rule in [symmetric_rule_1d(1.5), one_sided_rule_1d(1.5)] {
            let op = assemble_periodic(&grid, &rule).unwrap();
            for i in 0..op.n_rows {
                assert!(op.diagonal(i) <= 0.0);
                for (_, c) in op.row(i) {
                    assert!(c >= 0.0);
                }
            }
        }
    }

    #[test]
    fn cosine_is_near_eigenfunction() {
        // Plane waves diagonalize translation-invariant operators; at n=128
        // the discrete image of cos must be a cosine up to 1% shape error.
        let grid = TorusGrid::new(1, 128).unwrap();
        let op = assemble_periodic(&grid, &symmetric_rule_1d(1.5)).unwrap();
        let v = PeriodicField::from_fn(&grid, |y| (std::f64::consts::TAU * y[0]).cos());
        let av = op.apply(&v.values).unwrap();
        let n = grid.len();
        let mut c_cos = 0.0;
        let mut c_sin = 0.0;
        for i in 0..n {
            let y = i as f64 / n as f64;
            c_cos += av[i] * (std::f64::consts::TAU * y).cos();
            c_sin += av[i] * (std::f64::consts::TAU * y).sin();
        }
        c_cos *= 2.0 / n as f64;
        c_sin *= 2.0 / n as f64;
        let sigma = -c_cos;
        assert!(sigma > 0.0, "symbol must be negative on cos, got {c_cos}");
        // symmetric measure: no sine response
        assert!(c_sin.abs() < 1e-8 * sigma, "sine leak {c_sin} vs {sigma}");
        let mut residual = 0.0f64;
        let mut norm = 0.0f64;
        for i in 0..n {
            let y = i as f64 / n as f64;
            let fit = c_cos * (std::f64::consts::TAU * y).cos();
            residual += (av[i] - fit) * (av[i] - fit);
            norm += av[i] * av[i];
        }
        assert!(
            residual.sqrt() <= 0.01 * norm.sqrt(),
            "shape error {} above 1%",
            residual.sqrt() / norm.sqrt()
        );
    }

    #[test]
    fn upwind_uses_monotone_neighbor() {
        // One-sided rightward jumps give a positive drift; the compensator
        // -c dv/dy must then couple to the backward neighbor so its
        // off-diagonal coefficient stays nonnegative.
        let grid = TorusGrid::new(1, 64).unwrap();
        let rule = one_sided_rule_1d(1.5);
        let c = rule.full_drift().unwrap();
        assert!(c[0] > 0.0);
        let op = assemble_periodic(&grid, &rule).unwrap();
        // The coupling to the backward neighbor must dominate the coupling of
        // the forward neighbor by at least c/h (interpolated jump mass is
        // rightward only).
        let i = 10usize;
        let h = grid.spacing();
        let backward: f64 = op
            .row(i)
            .filter(|&(j, _)| j == i - 1)
            .map(|(_, v)| v)
            .sum();
        assert!(
            backward >= c[0] / h,
            "backward coupling {backward} missing upwind mass {}",
            c[0] / h
        );
    }

    #[test]
    fn discrete_maximum_principle_on_random_fields() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let op = assemble_periodic(&grid, &one_sided_rule_1d(1.5)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let av = op.apply(&v).unwrap();
            let (imax, _) = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            assert!(
                av[imax] <= 1e-12 * op.max_row_magnitude(),
                "operator positive at a maximum"
            );
        }
    }

    #[test]
    fn translation_equivariance() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let (q, _, _) = builtin_example(BuiltinMeasure::Ex4 {
            dim: 2,
            alpha: 1.2,
            decay: 1.0,
        })
        .unwrap();
        let beta = JumpMap::identity(2);
        let rule = build_rule(&q, &beta, &RuleParams::new(1e-2, 2.0, 8)).unwrap();
        let op = assemble_periodic(&grid, &rule).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift = [3isize, 7];
        let shifted: Vec<f64> = (0..grid.len())
            .map(|i| v[grid.shift(i, &shift)])
            .collect();
        let av = op.apply(&v).unwrap();
        let a_shifted = op.apply(&shifted).unwrap();
        for i in 0..grid.len() {
            let want = av[grid.shift(i, &shift)];
            assert!(
                (a_shifted[i] - want).abs() <= 1e-12 * op.max_row_magnitude(),
                "row {i}: {} vs {want}",
                a_shifted[i]
            );
        }
    }

    #[test]
    fn summation_identity() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let op = assemble_periodic(&grid, &one_sided_rule_1d(1.5)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let av = op.apply(&v).unwrap();
        let total: f64 = av.iter().sum();
        let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(
            total.abs() <= 1e-8 * norm * op.max_row_magnitude().max(1.0),
            "summation identity violated: {total}"
        );
    }

    #[test]
    fn ex3_line_jumps_on_the_plane_grid() {
        // M=1 measure pushed to T^2 along an irrational slope.
        let (q, beta, _) = builtin_example(BuiltinMeasure::Ex3 {
            alpha: 1.5,
            slope: std::f64::consts::SQRT_2,
        })
        .unwrap();
        let rule = build_rule(&q, &beta, &RuleParams::new(1e-2, 2.0, 8)).unwrap();
        let grid = TorusGrid::new(2, 16).unwrap();
        let op = assemble_periodic(&grid, &rule).unwrap();
        let v = vec![1.0; grid.len()];
        assert!(op.apply(&v).unwrap().iter().all(|&x| x == 0.0));
    }

    fn domain_grid_1d(n: usize, rule: &QuadratureRule) -> DomainGrid {
        let h = 1.0 / n as f64;
        let collar = required_collar(rule, h);
        DomainGrid::new(vec![0.0], vec![1.0], n, collar).unwrap()
    }

    #[test]
    fn domain_constants_in_kernel() {
        // u == K, phi == K: the full row (interior + collar) sums to zero,
        // so A u + b vanishes up to rounding.
        let rule = symmetric_rule_1d(1.5);
        let grid = domain_grid_1d(64, &rule);
        let op = assemble_domain(&grid, &rule, &|_| 3.0, &|_| 1.0).unwrap();
        let u = vec![3.0; grid.interior_len()];
        let out = op.apply(&u).unwrap();
        let scale = op.max_row_magnitude() * 3.0;
        for &x in &out {
            assert!(x.abs() <= 1e-12 * scale, "residual {x}");
        }
    }

    #[test]
    fn domain_zero_data_gives_zero() {
        let rule = symmetric_rule_1d(1.5);
        let grid = domain_grid_1d(32, &rule);
        let op = assemble_domain(&grid, &rule, &|_| 0.0, &|_| 1.0).unwrap();
        let u = vec![0.0; grid.interior_len()];
        let out = op.apply(&u).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_sided_jumps_reach_only_the_right_collar() {
        // Ex1 jumps rightward. In the plain-difference form (gamma = 1) the
        // offset b is built from right-collar phi values only: phi supported
        // on the left collar produces b identically zero.
        let rule = one_sided_rule_1d(0.5);
        let grid = domain_grid_1d(64, &rule);
        let left_indicator = |x: &[f64]| if x[0] <= 0.0 { 1.0 } else { 0.0 };
        let op = assemble_domain(&grid, &rule, &left_indicator, &|_| 1.0).unwrap();
        let b = op.offset.as_ref().unwrap();
        assert!(b.iter().all(|&x| x == 0.0), "left collar leaked into b");

        // The compensated form's upwind difference may touch the left
        // boundary vertex, but never the collar strictly left of it.
        let rule2 = one_sided_rule_1d(1.5);
        let grid2 = domain_grid_1d(64, &rule2);
        let strict_left = |x: &[f64]| if x[0] < 0.0 { 1.0 } else { 0.0 };
        let op2 = assemble_domain(&grid2, &rule2, &strict_left, &|_| 1.0).unwrap();
        let b2 = op2.offset.as_ref().unwrap();
        assert!(b2.iter().all(|&x| x == 0.0), "strict left collar leaked");

        // and the right collar is strongly coupled near the right boundary
        let right_indicator = |x: &[f64]| if x[0] >= 1.0 { 1.0 } else { 0.0 };
        let op = assemble_domain(&grid, &rule, &right_indicator, &|_| 1.0).unwrap();
        let b = op.offset.as_ref().unwrap();
        let n = grid.interior_len();
        assert!(b[n - 1] > b[n / 2], "right rows draw most on the collar");
        assert!(b[n - 1] > 0.0);
    }

    #[test]
    fn collar_too_small_is_reported() {
        let rule = symmetric_rule_1d(1.5);
        let grid = DomainGrid::new(vec![0.0], vec![1.0], 32, 2).unwrap();
        match assemble_domain(&grid, &rule, &|_| 0.0, &|_| 1.0) {
            Err(Error::Config(msg)) => assert!(msg.contains("collar")),
            other => panic!("expected collar error, got {other:?}"),
        }
    }

    #[test]
    fn affine_fields_are_annihilated_inside() {
        // Multilinear interpolation is exact on affine fields, and the
        // compensator drift is computed from the same rule, so rows deep
        // inside the domain annihilate u(x) = x up to rounding.
        let rule = symmetric_rule_1d(1.5);
        let grid = domain_grid_1d(64, &rule);
        let op = assemble_domain(&grid, &rule, &|x| x[0], &|_| 1.0).unwrap();
        let u: Vec<f64> = grid
            .interior()
            .iter()
            .map(|&f| grid.ext_point(f)[0])
            .collect();
        let out = op.apply(&u).unwrap();
        // Interior row far from the boundary: the gamma-2 operator on an
        // affine field reduces to the tail-jump part beyond |z| <= 1 minus
        // the tail has no compensation on the domain form, so the value is
        // the tail first moment, not zero; check instead that the jump +
        // compensated part inside |z| <= 1 cancels: compare against the
        // directly computed tail contribution.
        let mid_rank = grid.interior_len() / 2;
        let tail = rule.tail_drift.as_ref().unwrap()[0];
        assert!(
            (out[mid_rank] - tail).abs() <= 1e-9 * op.max_row_magnitude(),
            "affine response {} vs tail moment {tail}",
            out[mid_rank]
        );
    }

    #[test]
    fn gamma1_domain_has_no_upwind() {
        let rule = one_sided_rule_1d(0.5);
        assert!(rule.drift.is_none());
        let grid = domain_grid_1d(32, &rule);
        let op = assemble_domain(&grid, &rule, &|_| 0.0, &|_| 1.0).unwrap();
        assert!(op.meta.drift.is_none());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let op = assemble_periodic(&grid, &symmetric_rule_1d(1.5)).unwrap();
        assert!(matches!(
            op.apply(&vec![0.0; 7]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn support_restricted_rule_errors_on_empty_annulus() {
        let q = LevyDensity::new(1, 1.5, KernelForm::Gamma2, Support::All, |z| {
            if z[0].abs() < 1e-6 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let beta = JumpMap::identity(1);
        assert!(build_rule(&q, &beta, &RuleParams::new(1e-2, 4.0, 8)).is_err());
    }
}
