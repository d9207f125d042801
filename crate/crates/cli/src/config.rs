//! Experiment configuration: versioned JSON schema and diagnostics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coron_core::coupling::{admissible_beta_range, solve_c_vector, CouplingSpec};
use coron_core::green::HoleSpec;
use coron_core::radial::geometric_grid;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    CVector,
    Spectrum,
    ReducedEnergy,
    CriticalPoint,
    ScalingChecks,
    RadialSweep,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::CVector => "c-vector",
            Task::Spectrum => "spectrum",
            Task::ReducedEnergy => "reduced-energy",
            Task::CriticalPoint => "critical-point",
            Task::ScalingChecks => "scaling-checks",
            Task::RadialSweep => "radial-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub dims: usize,
    pub coupling: CouplingConfig,
    pub domain: DomainConfig,
    #[serde(default)]
    pub reduction: ReductionConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub mu: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    /// Group boundaries `(0, l_1, …, m)`; one group when omitted.
    #[serde(default)]
    pub decomposition: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub ball: BallConfig,
    /// One hole per group, in group order.
    #[serde(default)]
    pub holes: Vec<HoleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    /// Origin when omitted.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_epsilon_grid")]
    pub epsilon_grid: Vec<f64>,
}

fn default_eta() -> f64 {
    coron_core::energy::DEFAULT_ETA
}

fn default_epsilon_grid() -> Vec<f64> {
    geometric_grid(1e-2, 1e-4, 8)
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            epsilon_grid: default_epsilon_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalingLaw {
    Single { q: f64 },
    Weighted { q: f64, nu1: f64, nu2: f64 },
    Pair { q1: f64, q2: f64, separation: f64 },
}

impl ScalingLaw {
    pub fn label(&self) -> String {
        match self {
            ScalingLaw::Single { q } => format!("single_q{q}"),
            ScalingLaw::Weighted { q, nu1, nu2 } => format!("weighted_q{q}_nu{nu1}_{nu2}"),
            ScalingLaw::Pair { q1, q2, separation } => format!("pair_q{q1}_{q2}_sep{separation}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    /// Dimension-dependent defaults when omitted.
    #[serde(default)]
    pub laws: Option<Vec<ScalingLaw>>,
    #[serde(default = "yes")]
    pub remainder: bool,
}

fn yes() -> bool {
    true
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            laws: None,
            remainder: true,
        }
    }
}

impl ScalingConfig {
    pub fn laws_for(&self, n: usize) -> Vec<ScalingLaw> {
        if let Some(l) = &self.laws {
            return l.clone();
        }
        let nf = n as f64;
        vec![
            ScalingLaw::Single { q: 1.0 },
            ScalingLaw::Single { q: nf / (nf - 2.0) },
            ScalingLaw::Single {
                q: 2.0 * nf / (nf - 2.0),
            },
            ScalingLaw::Weighted {
                q: 3.0,
                nu1: 0.0,
                nu2: 2.0,
            },
            ScalingLaw::Pair {
                q1: 2.0,
                q2: 2.0,
                separation: 0.5,
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "one")]
    pub chains: usize,
    /// Write one `profile_<eps>.csv` per solve.
    #[serde(default = "yes")]
    pub profiles: bool,
}

fn default_nodes() -> usize {
    2000
}

fn one() -> usize {
    1
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            nodes: default_nodes(),
            chains: 1,
            profiles: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Malformed {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| ConfigError::Malformed {
            path: path.to_owned(),
            source,
        })
    }

    pub fn decomposition(&self) -> Vec<usize> {
        self.coupling
            .decomposition
            .clone()
            .unwrap_or_else(|| vec![0, self.coupling.mu.len()])
    }

    pub fn ball_center(&self) -> Vec<f64> {
        self.domain
            .ball
            .center
            .clone()
            .unwrap_or_else(|| vec![0.0; self.dims])
    }

    pub fn coupling_spec(&self) -> coron_core::Result<CouplingSpec> {
        CouplingSpec::new(
            self.dims,
            self.coupling.mu.clone(),
            self.coupling.beta.clone(),
            self.decomposition(),
        )
    }

    pub fn wants(&self, t: Task) -> bool {
        self.tasks.contains(&t)
    }

    /// Largest `ε` the domain has to accommodate.
    pub fn max_epsilon(&self) -> f64 {
        self.reduction
            .epsilon_grid
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn error(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Warning,
            field: field.into(),
            message: message.into(),
        });
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Field-level checks. Coupling values outside the admissible ranges only
/// warn, so degenerate regions can be probed on purpose.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut d = Collector(Vec::new());
    if cfg.schema != SCHEMA_VERSION {
        d.error(
            "schema",
            format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                cfg.schema
            ),
        );
    }
    let n = cfg.dims;
    if n != 3 && n != 4 {
        d.error("dims", format!("N = {n} is not supported (3 or 4)"));
        return d.0;
    }
    let coupling_ok = validate_coupling(cfg, &mut d);
    validate_domain(cfg, &mut d);

    let r = &cfg.reduction;
    if !(r.eta > 0.0 && r.eta < 1.0) {
        d.error("reduction.eta", format!("{} must lie in (0, 1)", r.eta));
    }
    for (i, e) in r.epsilon_grid.iter().enumerate() {
        if !(*e > 0.0 && e.is_finite()) {
            d.error(
                format!("reduction.epsilon_grid[{i}]"),
                format!("{e} must be positive"),
            );
        }
    }
    if cfg.wants(Task::RadialSweep) {
        let mut sorted = r.epsilon_grid.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.len() < 3 {
            d.error(
                "reduction.epsilon_grid",
                "radial-sweep needs at least three values",
            );
        } else if sorted.windows(2).any(|w| w[0] == w[1]) {
            d.error("reduction.epsilon_grid", "values must be distinct");
        }
    }

    if cfg.wants(Task::Spectrum) && n != 4 {
        d.error("tasks", "spectrum is only available for N = 4");
    }
    let groups = cfg.decomposition().len().saturating_sub(1);
    if (cfg.wants(Task::ReducedEnergy) || cfg.wants(Task::CriticalPoint))
        && coupling_ok
        && cfg.domain.holes.len() != groups
    {
        d.error(
            "domain.holes",
            format!(
                "reduced energy needs one hole per group ({groups} groups, {} holes)",
                cfg.domain.holes.len()
            ),
        );
    }
    if cfg.wants(Task::RadialSweep) {
        let center = cfg.ball_center();
        let centered = cfg.domain.holes.len() == 1
            && cfg.domain.holes[0].center.len() == n
            && cfg.domain.holes[0]
                .center
                .iter()
                .zip(&center)
                .all(|(a, b)| (a - b).abs() < 1e-14);
        if !centered {
            d.error(
                "domain.holes",
                "radial-sweep requires a single hole at the ball center",
            );
        }
        if cfg.radial.nodes < 50 {
            d.error(
                "radial.nodes",
                format!("{} nodes are too few (at least 50)", cfg.radial.nodes),
            );
        }
        if cfg.radial.chains == 0 {
            d.error("radial.chains", "must be at least 1");
        }
    }
    if cfg.wants(Task::ScalingChecks) {
        for (i, law) in cfg.scaling.laws_for(n).iter().enumerate() {
            let field = format!("scaling.laws[{i}]");
            match *law {
                ScalingLaw::Single { q } if q.is_nan() || q <= 0.0 => {
                    d.error(field, "q must be positive")
                }
                ScalingLaw::Weighted { q, nu1, nu2 } => {
                    if let Err(e) =
                        coron_core::asymptotics::predicted_weighted_exponent(n, q, nu1, nu2)
                    {
                        d.error(field, e.to_string());
                    }
                }
                ScalingLaw::Pair { q1, q2, separation } => {
                    if !(q1 > 0.0 && q2 >= 0.0) {
                        d.error(field.clone(), "need q1 > 0 and q2 >= 0");
                    }
                    if !(separation > 0.0 && separation / 2.0 < cfg.domain.ball.radius) {
                        d.error(field, "bubble centers must be distinct and inside the ball");
                    }
                }
                _ => {}
            }
        }
    }
    if cfg.output.formats.is_empty() {
        d.warn(
            "output.formats",
            "no output format selected; only the exit code reports results",
        );
    }
    d.0
}

fn validate_coupling(cfg: &ExperimentConfig, d: &mut Collector) -> bool {
    let c = &cfg.coupling;
    let m = c.mu.len();
    let before = d.0.len();
    if m == 0 {
        d.error("coupling.mu", "at least one component is required");
        return false;
    }
    for (i, v) in c.mu.iter().enumerate() {
        if !(*v > 0.0 && v.is_finite()) {
            d.error(format!("coupling.mu[{i}]"), format!("{v} must be positive"));
        }
    }
    if c.beta.len() != m || c.beta.iter().any(|r| r.len() != m) {
        d.error("coupling.beta", format!("must be a {m} x {m} matrix"));
        return false;
    }
    for i in 0..m {
        if (c.beta[i][i] - c.mu[i]).abs() > SYMMETRY_TOL * c.mu[i].abs().max(1.0) {
            d.warn(
                format!("coupling.beta[{i}][{i}]"),
                format!(
                    "diagonal {} differs from mu = {}; mu is used",
                    c.beta[i][i], c.mu[i]
                ),
            );
        }
        for j in 0..i {
            let (a, b) = (c.beta[i][j], c.beta[j][i]);
            if !a.is_finite() || (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                d.error(
                    format!("coupling.beta[{i}][{j}]"),
                    format!("asymmetric: {a} vs beta[{j}][{i}] = {b}"),
                );
            }
        }
    }
    let dec = cfg.decomposition();
    if dec.first() != Some(&0) || dec.last() != Some(&m) || dec.windows(2).any(|w| w[1] <= w[0]) {
        d.error(
            "coupling.decomposition",
            format!("must increase strictly from 0 to {m}, got {dec:?}"),
        );
    }
    if d.0.len() > before {
        return false;
    }

    let Ok(spec) = cfg.coupling_spec() else {
        d.error("coupling", "rejected by the coupling model");
        return false;
    };
    for h in 0..spec.group_count() {
        let g = spec.group(h).expect("group index in range");
        if g.len() == 2 {
            let (i, j) = (g.start, g.start + 1);
            if !admissible_beta_range(c.mu[i], c.mu[j], c.beta[i][j]) {
                d.warn(
                    format!("coupling.beta[{i}][{j}]"),
                    format!(
                        "{} lies outside (−√(μ_i μ_j), min μ) ∪ (max μ, ∞); positive amplitudes or nondegeneracy may fail",
                        c.beta[i][j]
                    ),
                );
            }
        }
        if let Err(e) = solve_c_vector(&spec, h) {
            d.warn(
                format!("coupling (group {h})"),
                format!("amplitude solve fails: {e}"),
            );
        }
    }
    true
}

fn validate_domain(cfg: &ExperimentConfig, d: &mut Collector) {
    let n = cfg.dims;
    let ball = &cfg.domain.ball;
    if !(ball.radius > 0.0 && ball.radius.is_finite()) {
        d.error(
            "domain.ball.radius",
            format!("{} must be positive", ball.radius),
        );
        return;
    }
    let center = cfg.ball_center();
    if center.len() != n {
        d.error(
            "domain.ball.center",
            format!("needs {n} coordinates, got {}", center.len()),
        );
        return;
    }
    let eps = cfg.max_epsilon();
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let holes = &cfg.domain.holes;
    for (i, h) in holes.iter().enumerate() {
        let field = format!("domain.holes[{i}]");
        if h.center.len() != n {
            d.error(
                field,
                format!("center needs {n} coordinates, got {}", h.center.len()),
            );
            continue;
        }
        if !(h.radius_coeff > 0.0 && h.radius_coeff.is_finite()) {
            d.error(
                field,
                format!("radius_coeff {} must be positive", h.radius_coeff),
            );
            continue;
        }
        let reach = dist(&h.center, &center) + h.radius_coeff * eps;
        if reach >= ball.radius {
            d.error(
                field,
                format!(
                    "hole touches the boundary at epsilon = {eps}: |a − center| + r ε = {reach} >= R = {}",
                    ball.radius
                ),
            );
        }
    }
    for i in 0..holes.len() {
        for j in 0..i {
            let (a, b) = (&holes[i], &holes[j]);
            if a.center.len() != n || b.center.len() != n {
                continue;
            }
            let gap = dist(&a.center, &b.center);
            if gap <= (a.radius_coeff + b.radius_coeff) * eps {
                d.error(
                    format!("domain.holes[{i}]"),
                    format!("overlaps hole {j} at epsilon = {eps} (centers {gap} apart)"),
                );
            }
        }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
