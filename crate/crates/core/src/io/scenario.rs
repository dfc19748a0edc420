//! Versioned JSON scenario documents.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{load_empirical_csv, CorpusMode};
use super::{write_atomic, IoError, IoResult};
use crate::metrics::{AlgorithmCandidate, CapacityDistribution};
use crate::numeric::linspace;
use crate::planner::{BehavioralParams, SweepAxis, ThresholdPolicy};
use crate::score_model::{BetaComponent, JointScoreModel, Predictor, TrueScoreDistribution};
use crate::sim::SimConfig;

pub const SCENARIO_VERSION: u32 = 1;

fn default_policies() -> Vec<PolicySpec> {
    vec![PolicySpec::TwoPoint]
}

fn default_beta1() -> Vec<f64> {
    vec![0.0]
}

fn default_trials() -> usize {
    8000
}

fn default_grid() -> usize {
    2001
}

fn default_oracle_grid() -> usize {
    101
}

fn default_validate_n() -> Vec<usize> {
    vec![100, 400, 1600]
}

fn default_prefix() -> String {
    "capflag".into()
}

/// The document as written on disk, with defaults filled in after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub version: u32,
    pub model: ModelSpec,
    pub behavioral: BehavioralSpec,
    pub population: PopulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_beta1")]
    pub beta1: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub binary_mode: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateSpec>,
    /// Grid for score-optimal search on empirical models.
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Grid for the simulated threshold search.
    #[serde(default = "default_oracle_grid")]
    pub oracle_grid: usize,
    /// Population sizes of the fluid-versus-finite convergence study.
    #[serde(default = "default_validate_n")]
    pub validate_n: Vec<usize>,
    #[serde(default = "default_prefix")]
    pub output_prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehavioralSpec {
    pub p0: f64,
    pub delta_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Analytic {
        true_score: TrueScoreSpec,
        predictor: PredictorSpec,
    },
    /// CSV corpus; relative paths resolve against the scenario's directory.
    Empirical { path: String, mode: CorpusMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrueScoreSpec {
    Uniform,
    BetaMixture { components: Vec<ComponentSpec> },
    EmpiricalScores { scores: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    Perfect,
    GaussianNoiseClipped { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: AxisSpec,
    pub grid: GridSpec,
    /// Also simulate every grid point (slow); fluid values are always computed.
    #[serde(default)]
    pub simulate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSpec {
    Rho,
    P0,
}

/// Either explicit `values` or an inclusive `start`/`stop` range of `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Fixed { tau: f64 },
    CapacityMatching,
    ScoreOptimal,
    TwoPoint,
    GridOracle { grid_size: usize },
}

impl PolicySpec {
    pub fn to_policy(self) -> ThresholdPolicy {
        match self {
            PolicySpec::Fixed { tau } => ThresholdPolicy::Fixed(tau),
            PolicySpec::CapacityMatching => ThresholdPolicy::CapacityMatching,
            PolicySpec::ScoreOptimal => ThresholdPolicy::ScoreOptimal,
            PolicySpec::TwoPoint => ThresholdPolicy::TwoPointOptimal,
            PolicySpec::GridOracle { grid_size } => ThresholdPolicy::GridOracle(grid_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuSpec {
    Uniform { lo: f64, hi: f64 },
    Atoms { atoms: Vec<AtomSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub rho: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub name: String,
    pub model: ModelSpec,
}

/// A validated scenario with its models built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: JointScoreModel,
    pub params: BehavioralParams,
    pub policies: Vec<ThresholdPolicy>,
    pub mu: Option<CapacityDistribution>,
    pub candidates: Vec<AlgorithmCandidate>,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.spec.population.n
    }

    pub fn m(&self) -> usize {
        self.spec.population.m
    }

    pub fn rho(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    /// Sweep axis and grid, if the scenario declares one.
    pub fn sweep(&self) -> Option<(SweepAxis, Vec<f64>)> {
        self.spec.sweep.as_ref().map(|s| {
            let axis = match s.axis {
                AxisSpec::Rho => SweepAxis::Rho,
                AxisSpec::P0 => SweepAxis::P0,
            };
            (axis, grid_values(&s.grid).expect("validated at load"))
        })
    }

    pub fn sim_config(&self, beta1: f64) -> SimConfig {
        SimConfig {
            n: self.n(),
            m: self.m(),
            params: self.params,
            beta1,
            trials: self.spec.trials,
            seed: self.spec.seed,
            binary_mode: self.spec.binary_mode,
        }
    }
}

fn grid_values(grid: &GridSpec) -> Option<Vec<f64>> {
    match (grid, &grid.values) {
        (
            GridSpec {
                start: None,
                stop: None,
                points: None,
                ..
            },
            Some(v),
        ) => Some(v.clone()),
        (
            GridSpec {
                start: Some(a),
                stop: Some(b),
                points: Some(p),
                ..
            },
            None,
        ) => Some(linspace(*a, *b, *p)),
        _ => None,
    }
}

/// Reads and validates a scenario; relative data paths resolve against the
/// scenario file's directory.
pub fn load_scenario(path: &Path) -> IoResult<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        message: format!("cannot read scenario: {e}"),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, path, &base)
}

pub fn parse_scenario(text: &str, path: &Path, base_dir: &Path) -> IoResult<Scenario> {
    let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(spec, base_dir)
}

/// Writes the document with every default spelled out.
pub fn save_scenario(spec: &ScenarioSpec, path: &Path) -> IoResult<()> {
    let mut text = serde_json::to_string_pretty(spec).map_err(|e| IoError::io(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn build(spec: ScenarioSpec, base_dir: &Path) -> IoResult<Scenario> {
    if spec.version != SCENARIO_VERSION {
        return Err(IoError::invalid(
            "version",
            format!("unsupported version {}, expected {SCENARIO_VERSION}", spec.version),
        ));
    }
    let params = BehavioralParams::new(spec.behavioral.p0, spec.behavioral.delta_p)
        .map_err(|e| IoError::within("behavioral", e))?;
    if spec.population.n == 0 {
        return Err(IoError::invalid("population.n", "must be at least 1"));
    }
    if let Some(sweep) = &spec.sweep {
        check_sweep(sweep, &params)?;
    }
    if spec.policies.is_empty() {
        return Err(IoError::invalid("policies", "list is empty"));
    }
    let policies: Vec<ThresholdPolicy> = spec.policies.iter().map(|p| p.to_policy()).collect();
    for (i, p) in policies.iter().enumerate() {
        p.validate().map_err(|e| match e {
            crate::error::Error::InvalidParameter { reason, .. } => IoError::invalid(
                match p {
                    ThresholdPolicy::Fixed(_) => format!("policies[{i}].tau"),
                    _ => format!("policies[{i}].grid_size"),
                },
                reason,
            ),
            other => IoError::Model(other),
        })?;
    }
    if spec.beta1.is_empty() {
        return Err(IoError::invalid("beta1", "list is empty"));
    }
    for (i, b) in spec.beta1.iter().enumerate() {
        if !(0.0..=1.0).contains(b) {
            return Err(IoError::invalid(format!("beta1[{i}]"), format!("{b} is outside [0, 1]")));
        }
    }
    if spec.trials == 0 {
        return Err(IoError::invalid("trials", "must be at least 1"));
    }
    if spec.grid_size < 2 {
        return Err(IoError::invalid("grid_size", "must be at least 2"));
    }
    if spec.oracle_grid < 2 {
        return Err(IoError::invalid("oracle_grid", "must be at least 2"));
    }
    for (i, &n) in spec.validate_n.iter().enumerate() {
        if n == 0 {
            return Err(IoError::invalid(format!("validate_n[{i}]"), "must be at least 1"));
        }
    }
    if spec.output_prefix.is_empty() {
        return Err(IoError::invalid("output_prefix", "must be nonempty"));
    }
    let model = build_model(&spec.model, "model", base_dir)?;
    let mu = spec.mu.as_ref().map(build_mu).transpose()?;
    let mut candidates = Vec::with_capacity(spec.candidates.len());
    for (i, c) in spec.candidates.iter().enumerate() {
        if c.name.is_empty() {
            return Err(IoError::invalid(format!("candidates[{i}].name"), "must be nonempty"));
        }
        if spec.candidates[..i].iter().any(|o| o.name == c.name) {
            return Err(IoError::invalid(
                format!("candidates[{i}].name"),
                format!("duplicate name `{}`", c.name),
            ));
        }
        let model = build_model(&c.model, &format!("candidates[{i}].model"), base_dir)?;
        candidates.push(AlgorithmCandidate::new(c.name.clone(), model));
    }
    Ok(Scenario {
        spec,
        model,
        params,
        policies,
        mu,
        candidates,
    })
}

fn check_sweep(sweep: &SweepSpec, params: &BehavioralParams) -> IoResult<()> {
    let values = grid_values(&sweep.grid).ok_or_else(|| {
        IoError::invalid("sweep.grid", "give either `values` or all of `start`, `stop`, `points`")
    })?;
    if let Some(p) = sweep.grid.points {
        if p < 2 {
            return Err(IoError::invalid("sweep.grid.points", "must be at least 2"));
        }
    }
    if values.is_empty() {
        return Err(IoError::invalid("sweep.grid.values", "list is empty"));
    }
    for (i, &x) in values.iter().enumerate() {
        let field = || {
            if sweep.grid.values.is_some() {
                format!("sweep.grid.values[{i}]")
            } else {
                "sweep.grid".to_string()
            }
        };
        match sweep.axis {
            AxisSpec::Rho if !(x.is_finite() && x >= 0.0) => {
                return Err(IoError::invalid(field(), format!("capacity ratio {x} is negative")));
            }
            AxisSpec::P0 => {
                if let Err(e) = BehavioralParams::new(x, params.delta_p) {
                    return Err(IoError::invalid(field(), format!("p0 = {x}: {e}")));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn build_model(spec: &ModelSpec, prefix: &str, base_dir: &Path) -> IoResult<JointScoreModel> {
    match spec {
        ModelSpec::Analytic { true_score, predictor } => {
            let dist = match true_score {
                TrueScoreSpec::Uniform => TrueScoreDistribution::Uniform01,
                TrueScoreSpec::BetaMixture { components } => TrueScoreDistribution::BetaMixture(
                    components
                        .iter()
                        .map(|c| BetaComponent::new(c.weight, c.alpha, c.beta))
                        .collect(),
                ),
                TrueScoreSpec::EmpiricalScores { scores } => TrueScoreDistribution::EmpiricalScores(scores.clone()),
            };
            dist.validate()
                .map_err(|e| IoError::within(&format!("{prefix}.true_score"), e))?;
            let predictor = match *predictor {
                PredictorSpec::Perfect => Predictor::Perfect,
                PredictorSpec::GaussianNoiseClipped { sigma } => {
                    if !(sigma.is_finite() && sigma >= 0.0) {
                        return Err(IoError::invalid(format!("{prefix}.predictor.sigma"), "must be nonnegative"));
                    }
                    Predictor::GaussianNoiseClipped { sigma }
                }
            };
            JointScoreModel::analytic(dist, predictor).map_err(|e| IoError::within(prefix, e))
        }
        ModelSpec::Empirical { path, mode } => {
            let resolved: PathBuf = base_dir.join(path);
            load_empirical_csv(&resolved, *mode)
        }
    }
}

fn build_mu(spec: &MuSpec) -> IoResult<CapacityDistribution> {
    let mu = match spec {
        MuSpec::Uniform { lo, hi } => CapacityDistribution::UniformRatio { lo: *lo, hi: *hi },
        MuSpec::Atoms { atoms } => CapacityDistribution::Atoms {
            atoms: atoms
                .iter()
                .map(|a| crate::metrics::CapacityAtom {
                    rho: a.rho,
                    weight: a.weight,
                })
                .collect(),
        },
    };
    mu.validate().map_err(|e| IoError::within("", e))?;
    Ok(mu)
}
