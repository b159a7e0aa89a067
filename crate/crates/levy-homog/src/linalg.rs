//! Linear solves for the strictly diagonally dominant M-matrices produced by
//! the monotone discretizations. Small systems go through a dense LU
//! factorization, larger ones through BiCGStab with Jacobi preconditioning.
//! Both paths finish with iterative refinement against the exact sparse
//! residual.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Above this many unknowns the dense factorization is abandoned for the
/// preconditioned Krylov path.
pub const DENSE_LIMIT: usize = 4200;

/// `M v = rhs` with `M = diag + offdiag`, strictly diagonally dominant with
/// positive diagonal and nonpositive off-diagonal entries.
#[derive(Debug, Clone)]
pub struct MonotoneSystem {
    pub n: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub residual_inf: f64,
    pub iterations: usize,
}

impl MonotoneSystem {
    pub fn new(
        diag: Vec<f64>,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<MonotoneSystem> {
        let n = diag.len();
        if row_ptr.len() != n + 1 {
            return Err(Error::ShapeMismatch("row_ptr length mismatch".into()));
        }
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Solver(
                "system diagonal must be strictly positive".into(),
            ));
        }
        Ok(MonotoneSystem {
            n,
            diag,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = self.diag[i] * v[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * v[self.col_idx[k]];
            }
            out[i] = acc;
        }
        out
    }

    /// `rhs - M v` with exact product errors (FMA) and Neumaier summation.
    /// The plain residual floors out at eps * |M| * |v|, which for rules with
    /// large near-singularity mass sits above the solver contract; the
    /// compensated residual is what iterative refinement needs to push the
    /// true residual down to the data scale.
    pub fn residual_compensated(&self, v: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let mut sum = rhs[i];
            let mut comp = 0.0f64;
            let add = |sum: &mut f64, comp: &mut f64, value: f64| {
                let t = *sum + value;
                if sum.abs() >= value.abs() {
                    *comp += (*sum - t) + value;
                } else {
                    *comp += (value - t) + *sum;
                }
                *sum = t;
            };
            let term = |sum: &mut f64, comp: &mut f64, a: f64, b: f64| {
                let p = a * b;
                let p_err = a.mul_add(b, -p);
                add(sum, comp, p);
                add(sum, comp, p_err);
            };
            term(&mut sum, &mut comp, -self.diag[i], v[i]);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                term(&mut sum, &mut comp, -self.vals[k], v[self.col_idx[k]]);
            }
            out[i] = sum + comp;
        }
        out
    }

    pub fn residual_inf(&self, v: &[f64], rhs: &[f64]) -> f64 {
        self.residual_compensated(v, rhs)
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }

    pub fn factor(self) -> Result<FactoredSystem> {
        if self.n <= DENSE_LIMIT {
            let mut m = DMatrix::<f64>::zeros(self.n, self.n);
            for i in 0..self.n {
                m[(i, i)] = self.diag[i];
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    m[(i, self.col_idx[k])] += self.vals[k];
                }
            }
            let lu = m.lu();
            Ok(FactoredSystem {
                system: self,
                lu: Some(lu),
            })
        } else {
            Ok(FactoredSystem {
                system: self,
                lu: None,
            })
        }
    }
}

pub struct FactoredSystem {
    system: MonotoneSystem,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl FactoredSystem {
    pub fn system(&self) -> &MonotoneSystem {
        &self.system
    }

    /// Solve to roughly machine-level residual (a couple of refinement steps
    /// on top of the factorization or Krylov iteration).
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        if rhs.len() != self.system.n {
            return Err(Error::ShapeMismatch("rhs length mismatch".into()));
        }
        let rhs_norm = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if rhs_norm == 0.0 {
            return Ok((
                vec![0.0; self.system.n],
                SolveStats {
                    residual_inf: 0.0,
                    iterations: 0,
                },
            ));
        }
        let mut x = self.solve_once(rhs, None)?;
        let mut iterations = 1;
        // Iterative refinement with compensated residuals: drives the true
        // residual toward the data scale instead of eps * |M| * |x|.
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let mut best_x = x.clone();
        let mut best_norm = f64::INFINITY;
        let mut stagnations = 0;
        for _ in 0..12 {
            let r = self.system.residual_compensated(&x, rhs);
            let r_norm = inf(&r);
            if r_norm < best_norm {
                best_norm = r_norm;
                best_x.copy_from_slice(&x);
                stagnations = 0;
            } else {
                // corrections jitter near the representation floor; allow one
                // retry before settling on the best iterate
                stagnations += 1;
                if stagnations >= 2 {
                    break;
                }
            }
            if best_norm <= 1e-16 * (rhs_norm + inf(&x)) {
                break;
            }
            let dx = self.solve_once(&r, Some(&x))?;
            for i in 0..x.len() {
                x[i] += dx[i];
            }
            iterations += 1;
        }
        Ok((
            best_x,
            SolveStats {
                residual_inf: best_norm,
                iterations,
            },
        ))
    }


    fn solve_once(&self, rhs: &[f64], warm: Option<&[f64]>) -> Result<Vec<f64>> {
        match &self.lu {
            Some(lu) => {
                let b = DVector::from_column_slice(rhs);
                let x = lu
                    .solve(&b)
                    .ok_or_else(|| Error::Solver("dense LU factorization is singular".into()))?;
                Ok(x.as_slice().to_vec())
            }
            None => bicgstab(&self.system, rhs, warm),
        }
    }
}

/// Jacobi-preconditioned BiCGStab. The systems here are strictly diagonally
/// dominant, where this converges reliably; a stall is treated as a solver
/// error carrying the residual history.
fn bicgstab(sys: &MonotoneSystem, rhs: &[f64], warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = sys.n;
    let inv_diag: Vec<f64> = sys.diag.iter().map(|d| 1.0 / d).collect();
    let mut x = warm.map(|_| vec![0.0; n]).unwrap_or_else(|| {
        // cold start from the Jacobi guess
        rhs.iter().zip(&inv_diag).map(|(b, d)| b * d).collect()
    });
    let mut r: Vec<f64> = {
        let ax = sys.apply(&x);
        rhs.iter().zip(ax).map(|(b, a)| b - a).collect()
    };
    let r0 = r.clone();
    let rhs_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let tol = 1e-14 * rhs_norm;

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let inf = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut history = Vec::new();

    let max_iter = 200 + 50 * (n as f64).sqrt() as usize;
    for _ in 0..max_iter {
        let rho_next = dot(&r0, &r);
        if rho_next.abs() < 1e-300 {
            break;
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat: Vec<f64> = p.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        v = sys.apply(&p_hat);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(a, b)| a - alpha * b).collect();
        if inf(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(x);
        }
        let s_hat: Vec<f64> = s.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let t = sys.apply(&s_hat);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Solver("BiCGStab breakdown: t vanished".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
        }
        r = s.iter().zip(&t).map(|(a, b)| a - omega * b).collect();
        let rn = inf(&r);
        history.push(rn);
        if rn <= tol {
            return Ok(x);
        }
        if omega.abs() < 1e-300 {
            return Err(Error::Solver("BiCGStab breakdown: omega vanished".into()));
        }
    }
    let tail: Vec<String> = history
        .iter()
        .rev()
        .take(8)
        .map(|v| format!("{v:.3e}"))
        .collect();
    Err(Error::Solver(format!(
        "BiCGStab did not reach tolerance {tol:.3e}; recent residuals: {}",
        tail.join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_dominant_system(n: usize, seed: u64) -> (MonotoneSystem, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::new();
        for i in 0..n {
            let mut off_sum = 0.0;
            for _ in 0..5 {
                let j = rng.random_range(0..n);
                if j == i {
                    continue;
                }
                let v: f64 = -rng.random_range(0.0..1.0);
                col_idx.push(j);
                vals.push(v);
                off_sum += v.abs();
            }
            row_ptr.push(col_idx.len());
            diag.push(off_sum + rng.random_range(0.5..1.5));
        }
        let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sys = MonotoneSystem::new(diag, row_ptr, col_idx, vals).unwrap();
        let rhs = sys.apply(&truth);
        (sys, rhs)
    }

    #[test]
    fn dense_path_solves_exactly() {
        let (sys, rhs) = random_dominant_system(200, 1);
        let f = sys.clone().factor().unwrap();
        let (x, stats) = f.solve(&rhs).unwrap();
        assert!(stats.residual_inf <= 1e-12);
        let r = sys.residual_inf(&x, &rhs);
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn krylov_path_matches_dense() {
        let (sys, rhs) = random_dominant_system(300, 2);
        let dense = sys.clone().factor().unwrap();
        let (x_dense, _) = dense.solve(&rhs).unwrap();
        // force the Krylov path on the same system
        let f = FactoredSystem {
            system: sys,
            lu: None,
        };
        let (x_it, stats) = f.solve(&rhs).unwrap();
        assert!(stats.residual_inf <= 1e-11, "residual {}", stats.residual_inf);
        for (a, b) in x_dense.iter().zip(&x_it) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (sys, _) = random_dominant_system(50, 3);
        let f = sys.factor().unwrap();
        let (x, _) = f.solve(&vec![0.0; 50]).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaling_rhs_by_two_scales_solution_exactly() {
        let (sys, rhs) = random_dominant_system(80, 4);
        let f = sys.factor().unwrap();
        let (x1, _) = f.solve(&rhs).unwrap();
        let doubled: Vec<f64> = rhs.iter().map(|v| 2.0 * v).collect();
        let (x2, _) = f.solve(&doubled).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn nonpositive_diagonal_rejected() {
        assert!(MonotoneSystem::new(vec![1.0, 0.0], vec![0, 0, 0], vec![], vec![]).is_err());
    }
}
