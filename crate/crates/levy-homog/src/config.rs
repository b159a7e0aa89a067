//! JSON run configuration: parsing, validation, dotted-path overrides and
//! the content hash embedded into every output artifact.
//!
//! The format is documented by `schema/config.schema.json`, shipped with the
//! crate. Validation is native (serde plus explicit checks) and reports all
//! failures together rather than stopping at the first.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::measures::{
    builtin_example, BuiltinMeasure, JumpMap, KernelForm, LevyDensity, RescaledDensity, Support,
};

/// The JSON schema document describing [`RunConfig`].
pub const CONFIG_SCHEMA: &str = include_str!("../schema/config.schema.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Ambient dimension N of the torus and the domain.
    pub dim: usize,
    #[serde(default)]
    pub domain: DomainConfig,
    pub measure: MeasureConfig,
    #[serde(default)]
    pub beta: BetaConfig,
    /// Second jump structure for the coupled max problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure2: Option<MeasureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<BetaConfig>,
    /// "gamma2" keeps the compensator, "gamma1" uses plain differences;
    /// omitted: chosen by the singularity exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    #[serde(default = "default_one")]
    pub a: String,
    #[serde(default = "default_zero")]
    pub f: String,
    #[serde(default = "default_zero")]
    pub phi: String,
    /// Claimed lower bound of `a`, verified on a dense grid at load time.
    #[serde(default = "default_one_f64")]
    pub a0: f64,
}

fn default_one() -> String {
    "1".to_string()
}
fn default_zero() -> String {
    "0".to_string()
}
fn default_one_f64() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            lo: vec![0.0],
            hi: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    /// "example1" | "example2" | "example3" | "example4" | "expr"
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub params: MeasureParams,
    /// For "expr" measures: "all" | "positive_orthant" | "positive_halfline"
    /// | "negative_halfline".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    /// Density expression over z1..zM for "expr" measures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaConfig {
    /// "identity" | "ray" | "line_z" | "plane_xy"
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

impl Default for BetaConfig {
    fn default() -> Self {
        BetaConfig {
            kind: "identity".to_string(),
            direction: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    /// Cells per dimension of the domain grid.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Points per dimension of the periodic cell grid.
    #[serde(default = "default_cell_n")]
    pub cell_n: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_r_outer")]
    pub r_outer: f64,
    #[serde(default = "default_cpd")]
    pub cells_per_decade: usize,
    #[serde(default = "default_sectors")]
    pub angular_sectors: usize,
    /// Inner cutoff for the cell-problem rule; one grid cell is the default
    /// scale that keeps the discount-solve residual contract reachable.
    #[serde(default = "default_cell_rho")]
    pub cell_rho: f64,
    #[serde(default = "default_r_outer")]
    pub cell_r_outer: f64,
    /// Ball radius of the reachability graph; omitted: the grid spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_ball: Option<f64>,
}

fn default_n() -> usize {
    256
}
fn default_cell_n() -> usize {
    128
}
fn default_rho() -> f64 {
    1e-3
}
fn default_r_outer() -> f64 {
    4.0
}
fn default_cpd() -> usize {
    32
}
fn default_sectors() -> usize {
    64
}
fn default_cell_rho() -> f64 {
    1e-2
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            n: default_n(),
            cell_n: default_cell_n(),
            rho: default_rho(),
            r_outer: default_r_outer(),
            cells_per_decade: default_cpd(),
            angular_sectors: default_sectors(),
            cell_rho: default_cell_rho(),
            cell_r_outer: default_r_outer(),
            eps_ball: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Discount sequence; omitted: dyadic 2^-3 .. 2^-10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_seq: Option<Vec<f64>>,
    #[serde(default = "default_osc_tol")]
    pub osc_tol: f64,
    /// Explicit I sweep; omitted: sized from a crude first pass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_grid: Option<Vec<f64>>,
    #[serde(default = "default_i_points")]
    pub i_grid_points: usize,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// 0: resolve from LEVY_HOMOG_THREADS or fall back to 1.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_osc_tol() -> f64 {
    1e-4
}
fn default_i_points() -> usize {
    9
}
fn default_eps_list() -> Vec<f64> {
    vec![0.25, 0.125, 0.0625, 0.03125]
}
fn default_omega() -> f64 {
    1.0
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_seq: None,
            osc_tol: default_osc_tol(),
            i_grid: None,
            i_grid_points: default_i_points(),
            eps_list: default_eps_list(),
            omega: default_omega(),
            threads: 0,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parse a JSON document, apply `key.path=value` overrides, validate.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<RunConfig> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let config: RunConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("config does not match the schema: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_json(&text, overrides)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Collect every validation failure into one error.
    pub fn validate(&self) -> Result<()> {
        let mut failures: Vec<String> = Vec::new();
        let p = &self.problem;

        if p.dim == 0 || p.dim > 3 {
            failures.push(format!("problem.dim must be 1..=3, got {}", p.dim));
        }
        if p.domain.lo.len() != p.dim || p.domain.hi.len() != p.dim {
            failures.push("problem.domain lo/hi must have length dim".into());
        } else if p
            .domain
            .lo
            .iter()
            .zip(&p.domain.hi)
            .any(|(lo, hi)| hi <= lo)
        {
            failures.push("problem.domain must have positive widths".into());
        }
        validate_measure(&p.measure, "problem.measure", &mut failures);
        if let Some(m2) = &p.measure2 {
            validate_measure(m2, "problem.measure2", &mut failures);
            if p.beta2.is_none() {
                failures.push("problem.measure2 requires problem.beta2".into());
            }
        }
        validate_beta(&p.beta, "problem.beta", &mut failures);
        if let Some(b2) = &p.beta2 {
            validate_beta(b2, "problem.beta2", &mut failures);
        }
        if let Some(form) = &p.form {
            if form != "gamma1" && form != "gamma2" {
                failures.push(format!(
                    "problem.form must be \"gamma1\" or \"gamma2\", got \"{form}\""
                ));
            }
        }
        let y_vars: Vec<String> = (1..=p.dim).map(|d| format!("y{d}")).collect();
        let x_vars: Vec<String> = (1..=p.dim).map(|d| format!("x{d}")).collect();
        let y_refs: Vec<&str> = y_vars.iter().map(|s| s.as_str()).collect();
        let x_refs: Vec<&str> = x_vars.iter().map(|s| s.as_str()).collect();
        for (field, text, vars) in [
            ("problem.a", &p.a, &y_refs),
            ("problem.f", &p.f, &y_refs),
            ("problem.phi", &p.phi, &x_refs),
        ] {
            if let Err(e) = Expression::parse(text, vars) {
                failures.push(format!("{field}: {e}"));
            }
        }
        if !(p.a0 > 0.0) {
            failures.push(format!("problem.a0 must be positive, got {}", p.a0));
        }

        let d = &self.discretization;
        if d.n < 8 {
            failures.push("discretization.n must be at least 8".into());
        }
        if d.cell_n < 8 {
            failures.push("discretization.cell_n must be at least 8".into());
        }
        if !(0.0 < d.rho && d.rho < 1.0 && d.r_outer > 1.0) {
            failures.push("discretization must satisfy 0 < rho < 1 < r_outer".into());
        }
        if !(0.0 < d.cell_rho && d.cell_rho < 1.0 && d.cell_r_outer > 1.0) {
            failures.push("discretization must satisfy 0 < cell_rho < 1 < cell_r_outer".into());
        }
        if d.cells_per_decade < 4 {
            failures.push("discretization.cells_per_decade must be at least 4".into());
        }
        if d.angular_sectors < 2 || d.angular_sectors % 2 != 0 {
            failures.push("discretization.angular_sectors must be even and >= 2".into());
        }
        if let Some(eb) = d.eps_ball {
            if eb <= 0.0 {
                failures.push("discretization.eps_ball must be positive".into());
            }
        }

        let s = &self.solver;
        if let Some(seq) = &s.lambda_seq {
            if seq.len() < 2
                || seq.iter().any(|&l| l <= 0.0)
                || seq.windows(2).any(|w| w[1] >= w[0])
            {
                failures.push("solver.lambda_seq must be positive and strictly decreasing".into());
            }
        }
        if !(s.osc_tol > 0.0) {
            failures.push("solver.osc_tol must be positive".into());
        }
        if let Some(grid) = &s.i_grid {
            if grid.len() < 5 || grid.windows(2).any(|w| w[1] <= w[0]) {
                failures
                    .push("solver.i_grid must be strictly increasing with at least 5 points".into());
            }
        }
        if s.i_grid_points < 5 {
            failures.push("solver.i_grid_points must be at least 5".into());
        }
        if s.eps_list.is_empty()
            || s.eps_list.iter().any(|&e| e <= 0.0)
            || s.eps_list.windows(2).any(|w| w[1] >= w[0])
        {
            failures.push("solver.eps_list must be positive and strictly decreasing".into());
        }
        if !(0.0 < s.omega && s.omega <= 1.0) {
            failures.push("solver.omega must lie in (0, 1]".into());
        }
        if self.output_dir.is_empty() {
            failures.push("output_dir must not be empty".into());
        }

        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} validation failure(s):\n  - {}",
                failures.len(),
                failures.join("\n  - ")
            )))
        }
    }

    pub fn lambda_seq(&self) -> Vec<f64> {
        self.solver
            .lambda_seq
            .clone()
            .unwrap_or_else(crate::cell::default_lambda_seq)
    }

    /// Worker count: explicit config, then environment, then 1.
    pub fn resolve_threads(&self, flag: Option<usize>) -> usize {
        if let Some(t) = flag {
            return t.max(1);
        }
        if self.solver.threads > 0 {
            return self.solver.threads;
        }
        if let Ok(env) = std::env::var("LEVY_HOMOG_THREADS") {
            if let Ok(t) = env.parse::<usize>() {
                if t > 0 {
                    return t;
                }
            }
        }
        1
    }
}

fn validate_measure(m: &MeasureConfig, field: &str, failures: &mut Vec<String>) {
    match m.kind.as_str() {
        "example1" | "example3" | "example4" => {
            match m.alpha {
                Some(a) if 0.0 < a && a < 2.0 => {}
                Some(a) => failures.push(format!("{field}.alpha must lie in (0, 2), got {a}")),
                None => failures.push(format!("{field}.alpha is required for {}", m.kind)),
            }
            if m.kind == "example3" {
                match m.params.slope {
                    Some(s) if s > 0.0 => {}
                    _ => failures.push(format!("{field}.params.slope must be positive for example3")),
                }
            }
            if m.kind == "example4" {
                match m.params.decay {
                    Some(d) if d > 0.0 => {}
                    _ => failures.push(format!("{field}.params.decay must be positive for example4")),
                }
            }
        }
        "example2" => match (m.params.alpha1, m.params.alpha2) {
            (Some(a1), Some(a2)) if 1.0 < a1 && a1 < a2 && a2 < 2.0 => {}
            _ => failures.push(format!(
                "{field}.params must satisfy 1 < alpha1 < alpha2 < 2 for example2"
            )),
        },
        "expr" => {
            match m.alpha {
                Some(a) if 0.0 < a && a < 2.0 => {}
                _ => failures.push(format!("{field}.alpha in (0, 2) is required for expr measures")),
            }
            let dim = m.params.dim.unwrap_or(1);
            let z_vars: Vec<String> = (1..=dim).map(|d| format!("z{d}")).collect();
            let z_refs: Vec<&str> = z_vars.iter().map(|s| s.as_str()).collect();
            match &m.params.expr {
                Some(text) => {
                    if let Err(e) = Expression::parse(text, &z_refs) {
                        failures.push(format!("{field}.params.expr: {e}"));
                    }
                }
                None => failures.push(format!("{field}.params.expr is required for expr measures")),
            }
            if let Some(s) = &m.support {
                if !matches!(
                    s.as_str(),
                    "all" | "positive_orthant" | "positive_halfline" | "negative_halfline"
                ) {
                    failures.push(format!("{field}.support \"{s}\" is not recognized"));
                }
            }
        }
        other => failures.push(format!("{field}.kind \"{other}\" is not recognized")),
    }
}

fn validate_beta(b: &BetaConfig, field: &str, failures: &mut Vec<String>) {
    match b.kind.as_str() {
        "identity" | "line_z" | "plane_xy" => {}
        "ray" => match &b.direction {
            Some(dir) if !dir.is_empty() && dir.iter().any(|&d| d != 0.0) => {}
            _ => failures.push(format!("{field}.direction must be a nonzero vector for ray")),
        },
        other => failures.push(format!("{field}.kind \"{other}\" is not recognized")),
    }
}

fn apply_override(value: &mut serde_json::Value, item: &str) -> Result<()> {
    let (path, raw) = item.split_once('=').ok_or_else(|| {
        Error::Config(format!("override \"{item}\" is not of the form key.path=value"))
    })?;
    let mut cursor = value;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(Error::Config(format!("override path \"{path}\" has an empty segment")));
        }
        let map = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override path \"{path}\" does not address an object"))
        })?;
        if i + 1 == segments.len() {
            // A value replacing an existing string stays a string (coefficient
            // expressions like "0" must not turn into numbers); everything
            // else is parsed as a JSON literal when possible.
            let parsed = if matches!(map.get(*seg), Some(serde_json::Value::String(_))) {
                serde_json::Value::String(raw.to_string())
            } else {
                serde_json::from_str(raw)
                    .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()))
            };
            map.insert(seg.to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

/// A measure ready for numerical work: density, jump map and the rescaled
/// limit (analytic for built-ins, extracted snapshot for expression
/// densities).
pub struct ResolvedMeasure {
    pub density: LevyDensity,
    pub beta: JumpMap,
    pub rescaled: RescaledDensity,
    /// True when the limit density is the analytic one.
    pub analytic_limit: bool,
}

/// Build the measure/jump-map pair from a config block.
pub fn resolve_measure(
    m: &MeasureConfig,
    beta: &BetaConfig,
    form_override: Option<KernelForm>,
) -> Result<ResolvedMeasure> {
    let (mut density, default_beta, rescaled, analytic) = match m.kind.as_str() {
        "example1" => {
            let dim = m.params.dim.unwrap_or(1);
            let alpha = m.alpha.ok_or_else(|| Error::config("alpha required"))?;
            let (q, b, q0) = builtin_example(BuiltinMeasure::Ex1 { dim, alpha })?;
            (q, b, q0, true)
        }
        "example2" => {
            let alpha1 = m.params.alpha1.ok_or_else(|| Error::config("alpha1 required"))?;
            let alpha2 = m.params.alpha2.ok_or_else(|| Error::config("alpha2 required"))?;
            let (q, b, q0) = builtin_example(BuiltinMeasure::Ex2 { alpha1, alpha2 })?;
            (q, b, q0, true)
        }
        "example3" => {
            let alpha = m.alpha.ok_or_else(|| Error::config("alpha required"))?;
            let slope = m.params.slope.ok_or_else(|| Error::config("slope required"))?;
            let (q, b, q0) = builtin_example(BuiltinMeasure::Ex3 { alpha, slope })?;
            (q, b, q0, true)
        }
        "example4" => {
            let dim = m.params.dim.unwrap_or(1);
            let alpha = m.alpha.ok_or_else(|| Error::config("alpha required"))?;
            let decay = m.params.decay.ok_or_else(|| Error::config("decay required"))?;
            let (q, b, q0) = builtin_example(BuiltinMeasure::Ex4 { dim, alpha, decay })?;
            (q, b, q0, true)
        }
        "expr" => {
            let dim = m.params.dim.unwrap_or(1);
            let alpha = m.alpha.ok_or_else(|| Error::config("alpha required"))?;
            let support = match m.support.as_deref() {
                None | Some("all") => Support::All,
                Some("positive_orthant") => Support::PositiveOrthant,
                Some("positive_halfline") => Support::HalfLine { positive: true },
                Some("negative_halfline") => Support::HalfLine { positive: false },
                Some(other) => {
                    return Err(Error::Config(format!("unknown support \"{other}\"")))
                }
            };
            let text = m
                .params
                .expr
                .as_ref()
                .ok_or_else(|| Error::config("expr measures need params.expr"))?;
            let z_vars: Vec<String> = (1..=dim).map(|d| format!("z{d}")).collect();
            let z_refs: Vec<&str> = z_vars.iter().map(|s| s.as_str()).collect();
            let parsed = Expression::parse(text, &z_refs)?;
            let q = LevyDensity::from_expression(
                dim,
                alpha,
                KernelForm::for_alpha(alpha),
                support,
                parsed,
            )?;
            let eps_seq = crate::measures::default_eps_seq();
            let samples = default_extraction_samples(dim);
            let (q0, _) = crate::measures::extract_q0(&q, alpha, &eps_seq, &samples)?;
            (q.clone(), JumpMap::identity(dim), q0, false)
        }
        other => return Err(Error::Config(format!("unknown measure kind \"{other}\""))),
    };

    if let Some(form) = form_override {
        density.form = form;
    }

    let beta = match beta.kind.as_str() {
        "identity" => default_beta,
        "ray" => JumpMap::ray(
            beta.direction
                .clone()
                .ok_or_else(|| Error::config("ray beta needs a direction"))?,
        )?,
        "line_z" => JumpMap::line_z(),
        "plane_xy" => JumpMap::plane_xy(),
        other => return Err(Error::Config(format!("unknown beta kind \"{other}\""))),
    };
    if beta.source_dim != density.dim {
        return Err(Error::Config(format!(
            "beta maps from dimension {}, the measure lives in {}",
            beta.source_dim, density.dim
        )));
    }
    Ok(ResolvedMeasure {
        density,
        beta,
        rescaled,
        analytic_limit: analytic,
    })
}

/// Deterministic sample set for condition checks: one and a half decades of
/// radii in a fixed direction fan.
pub fn default_extraction_samples(dim: usize) -> Vec<Vec<f64>> {
    let radii = [0.5, 0.75, 1.0, 1.5, 2.0];
    let mut samples = Vec::new();
    match dim {
        1 => {
            for &r in &radii {
                samples.push(vec![r]);
                samples.push(vec![-r]);
            }
        }
        _ => {
            let dirs = 8;
            for k in 0..dirs {
                let theta = (k as f64 + 0.5) * std::f64::consts::TAU / dirs as f64;
                for &r in &radii {
                    let mut z = vec![0.0; dim];
                    z[0] = r * theta.cos();
                    z[1] = r * theta.sin();
                    if dim > 2 {
                        z[2] = 0.3 * r;
                    }
                    samples.push(z);
                }
            }
        }
    }
    samples
}

/// Resolve the kernel form: explicit config first, else by alpha.
pub fn resolve_form(p: &ProblemConfig) -> Option<KernelForm> {
    p.form.as_deref().map(|f| match f {
        "gamma1" => KernelForm::Gamma1,
        _ => KernelForm::Gamma2,
    })
}

/// Compile the three coefficient expressions into shareable closures,
/// verifying periodicity of `a` and `f` and the lower bound `a0`.
pub fn resolve_coefficients(
    p: &ProblemConfig,
    seed: u64,
) -> Result<(
    Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
)> {
    let y_vars: Vec<String> = (1..=p.dim).map(|d| format!("y{d}")).collect();
    let x_vars: Vec<String> = (1..=p.dim).map(|d| format!("x{d}")).collect();
    let y_refs: Vec<&str> = y_vars.iter().map(|s| s.as_str()).collect();
    let x_refs: Vec<&str> = x_vars.iter().map(|s| s.as_str()).collect();

    let a_expr = Expression::parse(&p.a, &y_refs)?;
    let f_expr = Expression::parse(&p.f, &y_refs)?;
    let phi_expr = Expression::parse(&p.phi, &x_refs)?;

    let a_periodic = a_expr.check_periodic(p.dim, 128, seed)?;
    if !a_periodic.passed {
        return Err(Error::Config(format!(
            "problem.a is not 1-periodic (defect {:.3e})",
            a_periodic.max_defect
        )));
    }
    let f_periodic = f_expr.check_periodic(p.dim, 128, seed.wrapping_add(1))?;
    if !f_periodic.passed {
        return Err(Error::Config(format!(
            "problem.f is not 1-periodic (defect {:.3e})",
            f_periodic.max_defect
        )));
    }
    let bound = a_expr.check_positive_lower_bound(p.a0, 128)?;
    if !bound.passed {
        return Err(Error::Config(format!(
            "problem.a violates the claimed lower bound a0 = {}: min sampled value {:.6e}",
            p.a0, bound.min_value
        )));
    }
    Ok((a_expr.into_fn(), f_expr.into_fn(), phi_expr.into_fn()))
}
