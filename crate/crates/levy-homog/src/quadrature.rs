//! Finite quadrature rules for singular jump densities.
//!
//! The annulus `rho <= |z| <= R` is cut into geometric radial cells (a fixed
//! number per radius decade) crossed with a sign partition (M = 1) or a
//! uniform angular partition (M = 2). Each cell contributes one node at its
//! radial-geometric center with the cell's mass as weight, so all weights are
//! nonnegative and the assembled operators stay monotone. The ball `|z| < rho`
//! is dropped, not Taylor-corrected; its compensated-integrand mass
//! `int |z|^gamma dq` is stored as an explicit error budget, as is the tail
//! moment `int_{|z|>R} |z|^(gamma-1) dq`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::measures::{norm, JumpMap, KernelForm, LevyDensity};

// Gauss-Legendre nodes/weights on [-1, 1].
const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

const BUDGET_REL_TOL: f64 = 1e-13;
const BUDGET_MAX_OCTAVES: usize = 600;

/// Parameters of a rule: cutoffs and resolution.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RuleParams {
    pub rho: f64,
    pub r_outer: f64,
    pub cells_per_decade: usize,
    pub angular_sectors: usize,
}

impl RuleParams {
    pub fn new(rho: f64, r_outer: f64, cells_per_decade: usize) -> RuleParams {
        RuleParams {
            rho,
            r_outer,
            cells_per_decade,
            angular_sectors: 64,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 < self.rho && self.rho < 1.0 && 1.0 < self.r_outer) {
            return Err(Error::config(format!(
                "cutoffs must satisfy 0 < rho < 1 < R, got rho={}, R={}",
                self.rho, self.r_outer
            )));
        }
        if self.cells_per_decade < 4 {
            return Err(Error::config("cells_per_decade must be at least 4"));
        }
        if self.angular_sectors < 2 || self.angular_sectors % 2 != 0 {
            return Err(Error::config("angular_sectors must be even and >= 2"));
        }
        Ok(())
    }
}

/// A finite, nonnegative rule approximating `dq` on an annulus, together with
/// the compensator drift pieces and explicit truncation budgets.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `beta(z_j)`, cached so operators and drift use identical values.
    pub jumps: Vec<Vec<f64>>,
    /// Compensator drift over nodes with `|z_j| <= 1` (gamma = 2 rules only).
    pub drift: Option<Vec<f64>>,
    /// Compensator drift over nodes with `|z_j| > 1` (gamma = 2 rules only).
    /// The cell-problem operator compensates over all jumps, the oscillatory
    /// problem only inside the unit ball; storing both pieces serves both.
    pub tail_drift: Option<Vec<f64>>,
    pub inner_cutoff: f64,
    pub outer_cutoff: f64,
    /// `int_{|z| < rho} |z|^gamma dq`, the mass dropped at the singularity.
    pub inner_error_bound: f64,
    /// `int_{|z| > R} |z|^(gamma-1) dq`, the mass dropped at infinity.
    pub tail_error_bound: f64,
    pub form: KernelForm,
}

impl QuadratureRule {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Full compensator drift `sum_j w_j beta(z_j)` (gamma = 2 rules).
    pub fn full_drift(&self) -> Option<Vec<f64>> {
        match (&self.drift, &self.tail_drift) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        }
    }

    /// Dump `(z_j, w_j)` rows for inspection.
    pub fn dump_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let dim = self.nodes.first().map_or(0, |n| n.len());
        let headers: Vec<String> = (1..=dim).map(|d| format!("z{d}")).collect();
        writeln!(out, "{},weight", headers.join(","))?;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            let coords: Vec<String> = z.iter().map(|c| format!("{c:.17e}")).collect();
            writeln!(out, "{},{:.17e}", coords.join(","), w)?;
        }
        Ok(())
    }
}

/// Geometric edges of `[lo, hi]` with about `cpd` cells per decade and a
/// forced breakpoint at radius 1 when the interval crosses it. The unit
/// radius separates the compensated from the uncompensated jumps, so it must
/// not sit inside a cell.
fn radial_edges(lo: f64, hi: f64, cpd: usize) -> Vec<f64> {
    let mut edges = Vec::new();
    let push_segment = |a: f64, b: f64, edges: &mut Vec<f64>| {
        let decades = (b / a).log10();
        let cells = ((decades * cpd as f64).ceil() as usize).max(1);
        let ratio = (b / a).powf(1.0 / cells as f64);
        if edges.is_empty() {
            edges.push(a);
        }
        let mut r = a;
        for k in 1..=cells {
            r = if k == cells { b } else { r * ratio };
            edges.push(r);
        }
    };
    if lo < 1.0 && 1.0 < hi {
        push_segment(lo, 1.0, &mut edges);
        push_segment(1.0, hi, &mut edges);
    } else {
        push_segment(lo, hi, &mut edges);
    }
    edges
}

/// GL8 integral of `f` on `[a, b]`.
fn gl8<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        acc += GL8_W[i] * f(mid + half * GL8_X[i]);
    }
    acc * half
}

fn gl4<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..4 {
        acc += GL4_W[i] * f(mid + half * GL4_X[i]);
    }
    acc * half
}

/// Antipodally exact unit directions for an even sector count: the second
/// half is the bitwise negation of the first, so symmetric densities cancel
/// drift contributions exactly.
fn sector_directions(sectors: usize) -> Vec<[f64; 2]> {
    let half = sectors / 2;
    let mut dirs = Vec::with_capacity(sectors);
    for k in 0..half {
        let theta = (k as f64 + 0.5) * std::f64::consts::TAU / sectors as f64;
        dirs.push([theta.cos(), theta.sin()]);
    }
    for k in 0..half {
        let d = dirs[k];
        dirs.push([-d[0], -d[1]]);
    }
    dirs
}

/// `int_{lo <= |z| <= hi} |z|^power dq(z)` by geometric cells and GL panels.
pub fn radial_moment(q: &LevyDensity, power: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(0.0 < lo && lo < hi) {
        return Err(Error::config("radial moment needs 0 < lo < hi"));
    }
    let cells = {
        let decades = (hi / lo).log10();
        ((decades * 16.0).ceil() as usize).max(4)
    };
    let ratio = (hi / lo).powf(1.0 / cells as f64);
    let mut total = 0.0;
    match q.dim {
        1 => {
            let mut a = lo;
            for _ in 0..cells {
                let b = (a * ratio).min(hi);
                for sign in [-1.0, 1.0] {
                    total += gl8(a, b, |r| q.eval(&[sign * r]) * r.powf(power));
                }
                a = b;
            }
        }
        2 => {
            let sectors = 64;
            let dtheta = std::f64::consts::TAU / sectors as f64;
            let mut a = lo;
            for _ in 0..cells {
                let b = (a * ratio).min(hi);
                for k in 0..sectors {
                    let t0 = k as f64 * dtheta;
                    total += gl4(a, b, |r| {
                        gl4(t0, t0 + dtheta, |theta| {
                            q.eval(&[r * theta.cos(), r * theta.sin()]) * r.powf(power) * r
                        })
                    });
                }
                a = b;
            }
        }
        d => {
            return Err(Error::config(format!(
                "radial moments are implemented for M <= 2, got M = {d}"
            )))
        }
    }
    Ok(total)
}

/// Sum octave contributions with geometric-tail acceleration: once the
/// octave ratio stabilizes below 1 (the density is asymptotically a power
/// law), the remaining tail is summed in closed form. Near-critical
/// exponents would otherwise need thousands of octaves and underflow f64.
fn sum_octaves(
    q: &LevyDensity,
    power: f64,
    start: f64,
    toward_zero: bool,
) -> Result<f64> {
    let mut total = 0.0f64;
    let mut edge = start;
    let mut prev_piece: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut stable_count = 0usize;
    for _ in 0..BUDGET_MAX_OCTAVES {
        let (lo, hi) = if toward_zero {
            (edge * 0.5, edge)
        } else {
            (edge, edge * 2.0)
        };
        let piece = radial_moment(q, power, lo, hi)?;
        if !piece.is_finite() {
            return Err(Error::config(format!(
                "moment int |z|^{power} dq is not finite near {}; the density is \
                 more singular than its declared order",
                if toward_zero { "zero" } else { "infinity" }
            )));
        }
        total += piece;
        if piece < BUDGET_REL_TOL * total.max(f64::MIN_POSITIVE) {
            return Ok(total);
        }
        if let Some(prev) = prev_piece {
            if prev > 0.0 {
                let ratio = piece / prev;
                if let Some(pr) = prev_ratio {
                    if (ratio - pr).abs() <= 1e-9 * pr.max(1e-30) {
                        stable_count += 1;
                    } else {
                        stable_count = 0;
                    }
                }
                prev_ratio = Some(ratio);
                if stable_count >= 3 {
                    if ratio >= 1.0 {
                        return Err(Error::config(format!(
                            "moment int |z|^{power} dq diverges (octave ratio {ratio:.6}); \
                             check the integrability order against alpha = {}",
                            q.alpha
                        )));
                    }
                    return Ok(total + piece * ratio / (1.0 - ratio));
                }
            }
        }
        prev_piece = Some(piece);
        edge = if toward_zero { lo } else { hi };
        if toward_zero && edge < 1e-140 {
            break;
        }
        if !toward_zero && edge > 1e140 {
            break;
        }
    }
    match prev_ratio {
        Some(r) if r < 1.0 => Ok(total + prev_piece.unwrap_or(0.0) * r / (1.0 - r)),
        _ => Err(Error::config(format!(
            "moment int |z|^{power} dq did not settle; check the integrability \
             order against alpha = {}",
            q.alpha
        ))),
    }
}

/// `int_{|z| < rho} |z|^power dq`.
fn moment_below(q: &LevyDensity, power: f64, rho: f64) -> Result<f64> {
    sum_octaves(q, power, rho, true)
}

/// `int_{|z| > R} |z|^power dq`.
fn moment_above(q: &LevyDensity, power: f64, r_outer: f64) -> Result<f64> {
    sum_octaves(q, power, r_outer, false)
}

/// Build the midpoint rule for `dq` pushed through `beta` on the annulus.
pub fn build_rule(q: &LevyDensity, beta: &JumpMap, params: &RuleParams) -> Result<QuadratureRule> {
    params.validate()?;
    if beta.source_dim != q.dim {
        return Err(Error::ShapeMismatch(format!(
            "jump map expects source dimension {}, density has {}",
            beta.source_dim, q.dim
        )));
    }
    let edges = radial_edges(params.rho, params.r_outer, params.cells_per_decade);
    let mut nodes: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();

    match q.dim {
        1 => {
            for cell in edges.windows(2) {
                let (a, b) = (cell[0], cell[1]);
                let r_mid = (a * b).sqrt();
                for sign in [-1.0f64, 1.0] {
                    let w = gl8(a, b, |r| q.eval(&[sign * r]));
                    if w > 0.0 {
                        nodes.push(vec![sign * r_mid]);
                        weights.push(w);
                    }
                }
            }
        }
        2 => {
            let dirs = sector_directions(params.angular_sectors);
            let dtheta = std::f64::consts::TAU / params.angular_sectors as f64;
            for cell in edges.windows(2) {
                let (a, b) = (cell[0], cell[1]);
                let r_mid = (a * b).sqrt();
                for (k, dir) in dirs.iter().enumerate() {
                    // Directions are antipodally paired; recover each sector's
                    // angular interval from its index.
                    let half = params.angular_sectors / 2;
                    let t0 = if k < half {
                        k as f64 * dtheta
                    } else {
                        (k - half) as f64 * dtheta + std::f64::consts::PI
                    };
                    let w = gl4(a, b, |r| {
                        gl4(t0, t0 + dtheta, |theta| {
                            q.eval(&[r * theta.cos(), r * theta.sin()]) * r
                        })
                    });
                    if w > 0.0 {
                        nodes.push(vec![r_mid * dir[0], r_mid * dir[1]]);
                        weights.push(w);
                    }
                }
            }
        }
        d => {
            return Err(Error::config(format!(
                "quadrature rules are implemented for M <= 2, got M = {d}; \
                 higher-dimensional densities enter only through 1D and 2D jump structures"
            )))
        }
    }

    if nodes.is_empty() {
        return Err(Error::EmptyRule(format!(
            "support of the density does not meet the annulus [{}, {}]",
            params.rho, params.r_outer
        )));
    }

    let jumps: Vec<Vec<f64>> = nodes.iter().map(|z| beta.eval(z)).collect();

    let (drift, tail_drift) = match q.form {
        KernelForm::Gamma2 => {
            let mut inner = vec![0.0; beta.target_dim];
            let mut tail = vec![0.0; beta.target_dim];
            for ((z, w), b) in nodes.iter().zip(&weights).zip(&jumps) {
                let target = if norm(z) <= 1.0 { &mut inner } else { &mut tail };
                for d in 0..beta.target_dim {
                    target[d] += w * b[d];
                }
            }
            (Some(inner), Some(tail))
        }
        KernelForm::Gamma1 => (None, None),
    };

    let gamma = q.form.gamma();
    let inner_error_bound = moment_below(q, gamma, params.rho)?;
    let tail_error_bound = moment_above(q, gamma - 1.0, params.r_outer)?;

    Ok(QuadratureRule {
        nodes,
        weights,
        jumps,
        drift,
        tail_drift,
        inner_cutoff: params.rho,
        outer_cutoff: params.r_outer,
        inner_error_bound,
        tail_error_bound,
        form: q.form,
    })
}

/// Dyadic refinement `rho_k = rho / 2^k`, `R_k = R 2^k`. The stored budgets
/// must shrink along the sequence; they do at the analytic rates
/// `rho^(2-alpha)` and `R^(gamma-1-alpha)` for power-law densities.
pub fn refine(
    q: &LevyDensity,
    beta: &JumpMap,
    base: &RuleParams,
    steps: usize,
) -> Result<Vec<QuadratureRule>> {
    if q.alpha >= 2.0 {
        return Err(Error::config("refinement requires alpha < 2"));
    }
    let mut rules = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let scale = 2f64.powi(k as i32);
        let params = RuleParams {
            rho: base.rho / scale,
            r_outer: base.r_outer * scale,
            cells_per_decade: base.cells_per_decade,
            angular_sectors: base.angular_sectors,
        };
        rules.push(build_rule(q, beta, &params)?);
    }
    for pair in rules.windows(2) {
        if pair[1].inner_error_bound > pair[0].inner_error_bound
            || pair[1].tail_error_bound > pair[0].tail_error_bound
        {
            return Err(Error::config(
                "refinement produced non-decreasing error budgets",
            ));
        }
    }
    Ok(rules)
}
