//! Jump densities, jump maps, and the rescaling that extracts the most
//! singular part of an asymmetric density.
//!
//! A density `q` on `R^M` with singularity exponent `alpha` is rescaled as
//! `eps^(M+alpha) q(eps z)`. When the family is dominated by `C |z|^-(M+alpha)`
//! and converges pointwise, the limit `q0` is positively homogeneous of degree
//! `-(M+alpha)` and its support is a cone. The cell problems downstream use
//! `q0`; the oscillatory problems keep the original `q`.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expression;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SupportFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Declared support of a density. Used to sample test points and to drop
/// quadrature cells with no mass.
#[derive(Clone)]
pub enum Support {
    All,
    /// All coordinates strictly positive.
    PositiveOrthant,
    /// One-dimensional half line.
    HalfLine { positive: bool },
    Predicate(SupportFn),
}

impl Support {
    pub fn contains(&self, z: &[f64]) -> bool {
        match self {
            Support::All => true,
            Support::PositiveOrthant => z.iter().all(|&c| c > 0.0),
            Support::HalfLine { positive } => {
                if *positive {
                    z[0] > 0.0
                } else {
                    z[0] < 0.0
                }
            }
            Support::Predicate(p) => p(z),
        }
    }

    /// Draw a point of the support from the annulus 0.5 <= |z| <= 2 by
    /// rejection. Errors when the support appears empty there.
    pub fn sample(&self, dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        for _ in 0..10_000 {
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let norm = norm(&z);
            if norm < 0.5 || norm > 2.0 {
                continue;
            }
            if self.contains(&z) {
                return Ok(z);
            }
        }
        Err(Error::Estimation(
            "support has no mass in the annulus 0.5 <= |z| <= 2".into(),
        ))
    }
}

impl std::fmt::Debug for Support {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Support::All => write!(f, "All"),
            Support::PositiveOrthant => write!(f, "PositiveOrthant"),
            Support::HalfLine { positive } => write!(f, "HalfLine {{ positive: {positive} }}"),
            Support::Predicate(_) => write!(f, "Predicate(..)"),
        }
    }
}

pub fn norm(z: &[f64]) -> f64 {
    z.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Which integrability order the density is paired with: `Gamma2` keeps the
/// gradient compensator in the operator, `Gamma1` uses plain differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum KernelForm {
    /// Second moment near zero; operator carries the compensator drift.
    Gamma2,
    /// First moment near zero; no compensator.
    Gamma1,
}

impl KernelForm {
    pub fn gamma(self) -> f64 {
        match self {
            KernelForm::Gamma2 => 2.0,
            KernelForm::Gamma1 => 1.0,
        }
    }

    pub fn for_alpha(alpha: f64) -> KernelForm {
        if alpha >= 1.0 {
            KernelForm::Gamma2
        } else {
            KernelForm::Gamma1
        }
    }
}

/// Positively 1-homogeneous jump map `beta: R^M -> R^N` with linear growth
/// bound `|beta(z)| <= b1 |z|`.
#[derive(Clone)]
pub struct JumpMap {
    pub source_dim: usize,
    pub target_dim: usize,
    pub bound_b1: f64,
    map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl JumpMap {
    pub fn new(
        source_dim: usize,
        target_dim: usize,
        bound_b1: f64,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<JumpMap> {
        if source_dim == 0 || target_dim == 0 {
            return Err(Error::config("jump map dimensions must be >= 1"));
        }
        if bound_b1 <= 0.0 {
            return Err(Error::config("jump map growth bound B1 must be positive"));
        }
        Ok(JumpMap {
            source_dim,
            target_dim,
            bound_b1,
            map: Arc::new(map),
        })
    }

    /// Identity map on `R^M`.
    pub fn identity(dim: usize) -> JumpMap {
        JumpMap::new(dim, dim, 1.0, |z| z.to_vec()).unwrap()
    }

    /// `beta(z) = z * direction` for scalar `z`.
    pub fn ray(direction: Vec<f64>) -> Result<JumpMap> {
        if direction.iter().all(|&d| d == 0.0) {
            return Err(Error::config("ray direction must be nonzero"));
        }
        let b1 = norm(&direction);
        let n = direction.len();
        JumpMap::new(1, n, b1, move |z| direction.iter().map(|d| d * z[0]).collect())
    }

    /// Embed `R^2` as the first two coordinates of `R^3`.
    pub fn plane_xy() -> JumpMap {
        JumpMap::new(2, 3, 1.0, |z| vec![z[0], z[1], 0.0]).unwrap()
    }

    /// Embed `R^1` as the last coordinate of `R^3`.
    pub fn line_z() -> JumpMap {
        JumpMap::new(1, 3, 1.0, |z| vec![0.0, 0.0, z[0]]).unwrap()
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        (self.map)(z)
    }

    /// Sample `eval(c z) = c eval(z)` and `|eval(z)| <= B1 |z|` on random points.
    pub fn check_structure(&self, trials: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let z: Vec<f64> = (0..self.source_dim)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let c: f64 = rng.random_range(0.01..100.0);
            let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
            let lhs = self.eval(&scaled);
            let rhs = self.eval(&z);
            let scale = norm(&rhs).max(1e-300);
            for d in 0..self.target_dim {
                if (lhs[d] - c * rhs[d]).abs() > 1e-12 * c * scale.max(1.0) {
                    return Err(Error::config(format!(
                        "jump map is not positively homogeneous at z={z:?}, c={c}"
                    )));
                }
            }
            if norm(&rhs) > self.bound_b1 * norm(&z) * (1.0 + 1e-12) {
                return Err(Error::config(format!(
                    "jump map violates the growth bound B1={} at z={z:?}",
                    self.bound_b1
                )));
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for JumpMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpMap")
            .field("source_dim", &self.source_dim)
            .field("target_dim", &self.target_dim)
            .field("bound_b1", &self.bound_b1)
            .finish()
    }
}

/// Jump density `q(z) dz` with singularity exponent `alpha` and declared
/// compensator order.
#[derive(Clone)]
pub struct LevyDensity {
    pub dim: usize,
    pub alpha: f64,
    pub form: KernelForm,
    pub density: DensityFn,
    pub support: Support,
}

impl LevyDensity {
    pub fn new(
        dim: usize,
        alpha: f64,
        form: KernelForm,
        support: Support,
        density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<LevyDensity> {
        if dim == 0 {
            return Err(Error::config("density dimension must be >= 1"));
        }
        if !(0.0 < alpha && alpha < 2.0) {
            return Err(Error::config(format!(
                "singularity exponent alpha={alpha} must lie in (0, 2)"
            )));
        }
        Ok(LevyDensity {
            dim,
            alpha,
            form,
            density: Arc::new(density),
            support,
        })
    }

    /// Build from a parsed expression over variables `z1..zM`.
    pub fn from_expression(
        dim: usize,
        alpha: f64,
        form: KernelForm,
        support: Support,
        expr: Expression,
    ) -> Result<LevyDensity> {
        if expr.var_names().len() != dim {
            return Err(Error::config(format!(
                "density expression has {} variables, expected {dim}",
                expr.var_names().len()
            )));
        }
        let supp = support.clone();
        let f = expr.into_fn();
        LevyDensity::new(dim, alpha, form, support, move |z| {
            if supp.contains(z) {
                f(z).max(0.0)
            } else {
                0.0
            }
        })
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        if self.support.contains(z) {
            (self.density)(z)
        } else {
            0.0
        }
    }
}

impl std::fmt::Debug for LevyDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevyDensity")
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("form", &self.form)
            .field("support", &self.support)
            .finish()
    }
}

/// The extracted limit density `q0`, homogeneous of degree `-(M+alpha)` on a
/// cone.
#[derive(Clone)]
pub struct RescaledDensity {
    pub dim: usize,
    pub alpha: f64,
    pub density: DensityFn,
    pub support: Support,
}

impl RescaledDensity {
    pub fn eval(&self, z: &[f64]) -> f64 {
        if self.support.contains(z) {
            (self.density)(z)
        } else {
            0.0
        }
    }

    /// View as a density usable by the quadrature builder.
    pub fn as_levy(&self, form: KernelForm) -> LevyDensity {
        let d = self.density.clone();
        let s = self.support.clone();
        LevyDensity {
            dim: self.dim,
            alpha: self.alpha,
            form,
            density: d,
            support: s,
        }
    }
}

impl std::fmt::Debug for RescaledDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RescaledDensity")
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("support", &self.support)
            .finish()
    }
}

/// The four built-in density families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinMeasure {
    /// `|z|^-(M+alpha)` restricted to the positive orthant; the rescaling is
    /// an exact fixed point.
    Ex1 { dim: usize, alpha: f64 },
    /// One-dimensional, exponent `alpha1` on `z <= -1` and `z > 0`, heavier
    /// exponent `alpha2` on `(-1, 0)`. The limit keeps only the negative side.
    Ex2 { alpha1: f64, alpha2: f64 },
    /// One-dimensional symmetric power law pushed onto a line of irrational
    /// slope in the plane.
    Ex3 { alpha: f64, slope: f64 },
    /// Tempered power law `exp(-decay |z|) |z|^-(M+alpha)` on all of `R^M`.
    Ex4 { dim: usize, alpha: f64, decay: f64 },
}

/// Build the (density, jump map, analytic limit) triple for a built-in family.
pub fn builtin_example(measure: BuiltinMeasure) -> Result<(LevyDensity, JumpMap, RescaledDensity)> {
    match measure {
        BuiltinMeasure::Ex1 { dim, alpha } => {
            if !(0.0 < alpha && alpha < 2.0) {
                return Err(Error::config(format!(
                    "Ex1 requires alpha in (0, 2), got {alpha}"
                )));
            }
            let p = dim as f64 + alpha;
            let q = LevyDensity::new(
                dim,
                alpha,
                KernelForm::for_alpha(alpha),
                Support::PositiveOrthant,
                move |z| norm(z).powf(-p),
            )?;
            let q0 = RescaledDensity {
                dim,
                alpha,
                density: Arc::new(move |z: &[f64]| norm(z).powf(-p)),
                support: Support::PositiveOrthant,
            };
            Ok((q, JumpMap::identity(dim), q0))
        }
        BuiltinMeasure::Ex2 { alpha1, alpha2 } => {
            if !(1.0 < alpha1 && alpha1 < alpha2 && alpha2 < 2.0) {
                return Err(Error::config(format!(
                    "Ex2 requires 1 < alpha1 < alpha2 < 2, got alpha1={alpha1}, alpha2={alpha2}"
                )));
            }
            let q = LevyDensity::new(1, alpha2, KernelForm::Gamma2, Support::All, move |z| {
                let z = z[0];
                if z == 0.0 {
                    f64::INFINITY
                } else if (-1.0..0.0).contains(&z) {
                    z.abs().powf(-(1.0 + alpha2))
                } else {
                    z.abs().powf(-(1.0 + alpha1))
                }
            })?;
            let p = 1.0 + alpha2;
            let q0 = RescaledDensity {
                dim: 1,
                alpha: alpha2,
                density: Arc::new(move |z: &[f64]| z[0].abs().powf(-p)),
                support: Support::HalfLine { positive: false },
            };
            Ok((q, JumpMap::identity(1), q0))
        }
        BuiltinMeasure::Ex3 { alpha, slope } => {
            if !(0.0 < alpha && alpha < 2.0) {
                return Err(Error::config(format!(
                    "Ex3 requires alpha in (0, 2), got {alpha}"
                )));
            }
            if slope <= 0.0 {
                return Err(Error::config("Ex3 requires a positive slope"));
            }
            let p = 1.0 + alpha;
            let q = LevyDensity::new(
                1,
                alpha,
                KernelForm::for_alpha(alpha),
                Support::All,
                move |z| z[0].abs().powf(-p),
            )?;
            let beta = JumpMap::ray(vec![1.0, slope])?;
            let q0 = RescaledDensity {
                dim: 1,
                alpha,
                density: Arc::new(move |z: &[f64]| z[0].abs().powf(-p)),
                support: Support::All,
            };
            Ok((q, beta, q0))
        }
        BuiltinMeasure::Ex4 { dim, alpha, decay } => {
            if !(0.0 < alpha && alpha < 2.0) {
                return Err(Error::config(format!(
                    "Ex4 requires alpha in (0, 2), got {alpha}"
                )));
            }
            if decay <= 0.0 {
                return Err(Error::config("Ex4 requires a positive decay rate"));
            }
            let p = dim as f64 + alpha;
            let q = LevyDensity::new(
                dim,
                alpha,
                KernelForm::for_alpha(alpha),
                Support::All,
                move |z| {
                    let r = norm(z);
                    (-decay * r).exp() * r.powf(-p)
                },
            )?;
            let q0 = RescaledDensity {
                dim,
                alpha,
                density: Arc::new(move |z: &[f64]| norm(z).powf(-p)),
                support: Support::All,
            };
            Ok((q, JumpMap::identity(dim), q0))
        }
    }
}

/// `eps^(M+alpha) q(eps z)`. The rescaling that condition (A) sends to zero.
pub fn rescale_pointwise(q: &LevyDensity, alpha: f64, eps: f64, z: &[f64]) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::config(format!("rescaling requires eps > 0, got {eps}")));
    }
    if z.iter().all(|&c| c == 0.0) {
        return Err(Error::Domain(
            "the rescaled density is singular at z = 0".into(),
        ));
    }
    let scaled: Vec<f64> = z.iter().map(|c| c * eps).collect();
    Ok(eps.powf(q.dim as f64 + alpha) * q.eval(&scaled))
}

/// Default dyadic rescaling sequence `2^-k`, k = 1..=12.
pub fn default_eps_seq() -> Vec<f64> {
    (1..=12).map(|k| 0.5f64.powi(k)).collect()
}

/// Threshold separating "limit is 0" from "limit is positive" relative to the
/// homogeneous scale `|z|^-(M+alpha)`.
pub const SUPPORT_DETECTION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SampleTrace {
    pub z: Vec<f64>,
    /// Rescaled values along the eps sequence.
    pub values: Vec<f64>,
    /// `|r_k - r_{k+1}|` for consecutive eps.
    pub deltas: Vec<f64>,
    pub in_support: bool,
}

#[derive(Debug, Clone)]
pub struct RescalingReport {
    /// Smallest constant making the domination bound hold on the sampled grid.
    pub c1: f64,
    pub traces: Vec<SampleTrace>,
    pub final_eps: f64,
    /// Number of samples classified inside the limiting cone.
    pub support_count: usize,
    /// Set when every sample is classified outside the cone (degenerate
    /// rescaling: the chosen alpha makes the limit vanish identically).
    pub degenerate: bool,
}

/// Run the rescaling along `eps_seq` and extract the limit density snapshot.
pub fn extract_q0(
    q: &LevyDensity,
    alpha: f64,
    eps_seq: &[f64],
    samples: &[Vec<f64>],
) -> Result<(RescaledDensity, RescalingReport)> {
    if eps_seq.len() < 4 {
        return Err(Error::config("rescaling needs at least 4 eps values"));
    }
    if eps_seq.windows(2).any(|w| w[1] >= w[0]) || eps_seq.iter().any(|&e| e <= 0.0) {
        return Err(Error::config("eps sequence must be positive and decreasing"));
    }
    if samples.is_empty() {
        return Err(Error::config("rescaling needs at least one sample point"));
    }
    let m = q.dim as f64;
    let mut c1 = 0.0f64;
    let mut traces = Vec::with_capacity(samples.len());
    let final_eps = *eps_seq.last().unwrap();
    let mut support_count = 0;

    for z in samples {
        if z.iter().all(|&c| c == 0.0) {
            return Err(Error::Domain("sample points must avoid z = 0".into()));
        }
        let homog_scale = norm(z).powf(-(m + alpha));
        let mut values = Vec::with_capacity(eps_seq.len());
        for &eps in eps_seq {
            let v = rescale_pointwise(q, alpha, eps, z)?;
            if !v.is_finite() {
                return Err(Error::RescalingFailed(format!(
                    "rescaled value is not finite at z={z:?}, eps={eps}"
                )));
            }
            c1 = c1.max(v / homog_scale);
            values.push(v);
        }
        let deltas: Vec<f64> = values.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
        let in_support = *values.last().unwrap() > SUPPORT_DETECTION_THRESHOLD * homog_scale;
        if in_support {
            support_count += 1;
        }
        traces.push(SampleTrace {
            z: z.clone(),
            values,
            deltas,
            in_support,
        });
    }

    // The bound must hold uniformly along the sequence. Growth of the
    // per-prefix constant signals a wrong (too large) alpha.
    let mut prefix_c1 = vec![0.0f64; eps_seq.len()];
    for trace in &traces {
        let homog_scale = norm(&trace.z).powf(-(m + alpha));
        for (k, &v) in trace.values.iter().enumerate() {
            prefix_c1[k] = prefix_c1[k].max(v / homog_scale);
        }
    }
    let head = prefix_c1
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(f64::MIN_POSITIVE);
    let tail = prefix_c1.last().copied().unwrap_or(0.0);
    if tail > 100.0 * head && tail > 1e6 {
        return Err(Error::RescalingFailed(format!(
            "domination constant grows without bound along eps (from {head:.3e} to {tail:.3e}); \
             condition fails for alpha={alpha}"
        )));
    }

    let report = RescalingReport {
        c1,
        traces,
        final_eps,
        support_count,
        degenerate: support_count == 0,
    };

    let snapshot_q = q.clone();
    let threshold = SUPPORT_DETECTION_THRESHOLD;
    let support_q = q.clone();
    let support = Support::Predicate(Arc::new(move |z: &[f64]| {
        if z.iter().all(|&c| c == 0.0) {
            return false;
        }
        let scale = norm(z).powf(-(support_q.dim as f64 + alpha));
        match rescale_pointwise(&support_q, alpha, final_eps, z) {
            Ok(v) => v > threshold * scale,
            Err(_) => false,
        }
    }));
    let density = Arc::new(move |z: &[f64]| {
        rescale_pointwise(&snapshot_q, alpha, final_eps, z).unwrap_or(0.0)
    });
    Ok((
        RescaledDensity {
            dim: q.dim,
            alpha,
            density,
            support,
        },
        report,
    ))
}

#[derive(Debug, Clone)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// False when the fitted exponent lies outside (0, 2). A bounded density
    /// fits exponent -M and is flagged here rather than erroring.
    pub in_range: bool,
    pub slope: f64,
    pub radii_used: usize,
}

/// Log-log regression of the radial average of `q` against the radius.
pub fn estimate_alpha(q: &LevyDensity, radii: &[f64]) -> Result<AlphaEstimate> {
    if radii.len() < 4 {
        return Err(Error::config("alpha estimation needs at least 4 radii"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("radii must be decreasing"));
    }
    if radii.iter().any(|&r| r <= 0.0 || r >= 1.0) {
        return Err(Error::config("radii must lie in (0, 1)"));
    }
    let directions = unit_directions(q.dim);
    let mut points = Vec::new();
    for &r in radii {
        let mut total = 0.0;
        for dir in &directions {
            let z: Vec<f64> = dir.iter().map(|d| d * r).collect();
            total += q.eval(&z);
        }
        let avg = total / directions.len() as f64;
        if avg > 0.0 && avg.is_finite() {
            points.push((r.ln(), avg.ln()));
        }
    }
    if points.len() < 2 {
        return Err(Error::Estimation(
            "density vanishes on all sampled radii".into(),
        ));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let alpha = -slope - q.dim as f64;
    Ok(AlphaEstimate {
        alpha,
        in_range: 0.0 < alpha && alpha < 2.0,
        slope,
        radii_used: points.len(),
    })
}

/// Fixed direction set for radial averages: both signs per axis plus
/// quarter-angle rays in 2D.
fn unit_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|k| {
                let theta = (k as f64 + 0.5) * std::f64::consts::TAU / 16.0;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        _ => {
            let mut dirs = Vec::new();
            for d in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut v = vec![0.0; dim];
                    v[d] = sign;
                    dirs.push(v);
                }
            }
            // diagonal ray to catch orthant-supported densities
            let diag = 1.0 / (dim as f64).sqrt();
            dirs.push(vec![diag; dim]);
            dirs
        }
    }
}

#[derive(Debug, Clone)]
pub struct HomogeneityReport {
    pub passed: bool,
    pub max_rel_error: f64,
    pub failures: Vec<(f64, Vec<f64>, f64)>,
}

/// Sample `s^(M+alpha) q0(s z) = q0(z)` on random `(s, z in S0)` pairs.
pub fn check_homogeneity(q0: &RescaledDensity, trials: usize, seed: u64) -> Result<HomogeneityReport> {
    if trials == 0 {
        return Err(Error::config("homogeneity check needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = q0.dim as f64 + q0.alpha;
    let mut max_rel_error = 0.0f64;
    let mut failures = Vec::new();
    for _ in 0..trials {
        let z = q0.support.sample(q0.dim, &mut rng)?;
        let s: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
        let base = q0.eval(&z);
        if base <= 0.0 {
            continue;
        }
        let scaled: Vec<f64> = z.iter().map(|c| c * s).collect();
        let lhs = s.powf(p) * q0.eval(&scaled);
        let rel = (lhs - base).abs() / base;
        if rel > max_rel_error {
            max_rel_error = rel;
        }
        if rel > 1e-10 {
            failures.push((s, z, rel));
        }
    }
    Ok(HomogeneityReport {
        passed: failures.is_empty(),
        max_rel_error,
        failures,
    })
}
