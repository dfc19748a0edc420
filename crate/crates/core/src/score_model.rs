//! Joint law of true scores `r` and predicted scores `r̂`.
//!
//! Every downstream computation goes through four primitives exposed here:
//! predicted-score quantiles, the flagged mass `L(τ) = E[r · 1{top 1-τ by r̂}]`,
//! conditional means derived from it, and population sampling.
//!
//! Three evaluation engines sit behind [`JointScoreModel`]:
//!
//! * continuous true scores with a perfect predictor use closed forms
//!   (incomplete-beta partial moments);
//! * continuous or discrete true scores with clipped Gaussian noise use a
//!   fixed 2048-node quadrature over true-score quantiles, treating the
//!   clipping atoms at 0 and 1 exactly;
//! * empirical corpora use sorted prefix sums.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{invalid, Error, Result};
use crate::numeric::{normal_cdf, normal_pdf, solve_increasing, tolerant_ceil};
use crate::quad::CompositeRule;

/// Quadrature nodes used for noisy analytic models (256 panels of 8).
pub const QUADRATURE_NODES: usize = 2048;
const QUAD_PANELS: usize = 256;
const QUAD_ORDER: usize = 8;

/// Step of the central difference used for `E[r | r̂ = q(τ)]` on noisy models.
const DERIVATIVE_STEP: f64 = 1e-5;

/// Default bin width, in quantile units, for empirical point conditional means.
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

const QUANTILE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaComponent {
    pub weight: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl BetaComponent {
    pub fn new(weight: f64, alpha: f64, beta: f64) -> Self {
        Self { weight, alpha, beta }
    }

    fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.alpha, self.beta, x)
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        ((self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p()
            - ln_beta(self.alpha, self.beta))
        .exp()
    }

    /// `E[r · 1{r ≥ x}]` via `E[r] · (1 - I_x(α + 1, β))`.
    fn upper_partial_moment(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.mean()
        } else if x >= 1.0 {
            0.0
        } else {
            self.mean() * (1.0 - beta_reg(self.alpha + 1.0, self.beta, x))
        }
    }
}

/// Marginal law of the true score.
#[derive(Debug, Clone, PartialEq)]
pub enum TrueScoreDistribution {
    Uniform01,
    BetaMixture(Vec<BetaComponent>),
    /// Uniform draw from a finite list of scores.
    EmpiricalScores(Vec<f64>),
}

impl TrueScoreDistribution {
    pub fn beta_mixture(components: Vec<BetaComponent>) -> Result<Self> {
        let d = Self::BetaMixture(components);
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(scores: Vec<f64>) -> Result<Self> {
        let d = Self::EmpiricalScores(scores);
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Uniform01 => Ok(()),
            Self::BetaMixture(components) => {
                if components.is_empty() {
                    return Err(invalid("components", "mixture needs at least one component"));
                }
                let mut total = 0.0;
                for (i, c) in components.iter().enumerate() {
                    if !(c.weight.is_finite() && c.weight >= 0.0) {
                        return Err(invalid(format!("components[{i}].weight"), "must be nonnegative"));
                    }
                    if !(c.alpha.is_finite() && c.alpha > 0.0) {
                        return Err(invalid(format!("components[{i}].alpha"), "must be positive"));
                    }
                    if !(c.beta.is_finite() && c.beta > 0.0) {
                        return Err(invalid(format!("components[{i}].beta"), "must be positive"));
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid("components", format!("weights sum to {total}, not 1")));
                }
                Ok(())
            }
            Self::EmpiricalScores(scores) => validate_unit_list("scores", scores.iter().copied()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Uniform01 => 0.5,
            Self::BetaMixture(cs) => cs.iter().map(|c| c.weight * c.mean()).sum(),
            Self::EmpiricalScores(s) => s.iter().sum::<f64>() / s.len() as f64,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform01 => x.clamp(0.0, 1.0),
            Self::BetaMixture(cs) => cs.iter().map(|c| c.weight * c.cdf(x)).sum(),
            Self::EmpiricalScores(s) => s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64,
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform01 => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::BetaMixture(cs) => cs.iter().map(|c| c.weight * c.pdf(x)).sum(),
            Self::EmpiricalScores(_) => f64::NAN,
        }
    }

    /// Inverse CDF. For empirical scores this is the `⌈un⌉`-th order statistic.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Uniform01 => u,
            Self::BetaMixture(cs) => {
                if u <= 0.0 {
                    return 0.0;
                }
                if u >= 1.0 {
                    return 1.0;
                }
                if let [c] = cs.as_slice() {
                    if c.alpha == 1.0 && c.beta == 1.0 {
                        return u;
                    }
                }
                solve_increasing(|x| self.cdf(x), |x| self.pdf(x), u, 0.0, 1.0, QUANTILE_TOL)
            }
            Self::EmpiricalScores(s) => {
                let mut sorted = s.clone();
                sorted.sort_by(f64::total_cmp);
                order_statistic(&sorted, u)
            }
        }
    }

    /// `E[r · 1{r ≥ x}]` for continuous laws.
    fn upper_partial_moment(&self, x: f64) -> f64 {
        match self {
            Self::Uniform01 => {
                let x = x.clamp(0.0, 1.0);
                0.5 * (1.0 - x * x)
            }
            Self::BetaMixture(cs) => cs.iter().map(|c| c.weight * c.upper_partial_moment(x)).sum(),
            Self::EmpiricalScores(s) => s.iter().filter(|&&v| v >= x).sum::<f64>() / s.len() as f64,
        }
    }

    fn is_continuous(&self) -> bool {
        !matches!(self, Self::EmpiricalScores(_))
    }
}

/// How predicted scores relate to true scores in analytic models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictor {
    /// `r̂ = r`.
    Perfect,
    /// `r̂ = clip(r + ε, 0, 1)` with `ε ~ N(0, σ²)`.
    GaussianNoiseClipped { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    pub predicted: f64,
    pub true_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub predicted: f64,
    pub outcome: bool,
}

/// Declarative description of a joint score law.
#[derive(Debug, Clone, PartialEq)]
pub enum JointScoreSpec {
    Analytic(TrueScoreDistribution, Predictor),
    EmpiricalJoint(Vec<ScorePair>),
    /// The true score is unobserved; the outcome stands in for it and every
    /// conditional mean becomes a positive rate.
    EmpiricalLabeled(Vec<LabeledScore>),
}

/// A validated joint score law with its evaluation engine precomputed.
#[derive(Debug, Clone)]
pub struct JointScoreModel {
    spec: JointScoreSpec,
    engine: Arc<Engine>,
}

impl PartialEq for JointScoreModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

#[derive(Debug)]
enum Engine {
    Continuous(TrueScoreDistribution),
    Noisy(NoisyEngine),
    Table(EmpiricalTable),
}

impl JointScoreModel {
    pub fn new(spec: JointScoreSpec) -> Result<Self> {
        let engine = match &spec {
            JointScoreSpec::Analytic(dist, predictor) => {
                dist.validate()?;
                let sigma = match *predictor {
                    Predictor::Perfect => 0.0,
                    Predictor::GaussianNoiseClipped { sigma } => {
                        if !(sigma.is_finite() && sigma >= 0.0) {
                            return Err(invalid("sigma", "must be nonnegative"));
                        }
                        sigma
                    }
                };
                match dist {
                    TrueScoreDistribution::EmpiricalScores(s) if sigma == 0.0 => {
                        Engine::Table(EmpiricalTable::new(s.iter().map(|&r| (r, r)).collect()))
                    }
                    d if sigma == 0.0 => Engine::Continuous(d.clone()),
                    d => Engine::Noisy(NoisyEngine::new(d, sigma)),
                }
            }
            JointScoreSpec::EmpiricalJoint(pairs) => {
                if pairs.is_empty() {
                    return Err(invalid("pairs", "empirical corpus is empty"));
                }
                validate_unit_list("score", pairs.iter().map(|p| p.predicted))?;
                validate_unit_list("true_score", pairs.iter().map(|p| p.true_score))?;
                Engine::Table(EmpiricalTable::new(
                    pairs.iter().map(|p| (p.predicted, p.true_score)).collect(),
                ))
            }
            JointScoreSpec::EmpiricalLabeled(rows) => {
                if rows.is_empty() {
                    return Err(invalid("rows", "labeled corpus is empty"));
                }
                validate_unit_list("score", rows.iter().map(|p| p.predicted))?;
                Engine::Table(EmpiricalTable::new(
                    rows.iter()
                        .map(|p| (p.predicted, if p.outcome { 1.0 } else { 0.0 }))
                        .collect(),
                ))
            }
        };
        Ok(Self {
            spec,
            engine: Arc::new(engine),
        })
    }

    pub fn analytic(dist: TrueScoreDistribution, predictor: Predictor) -> Result<Self> {
        Self::new(JointScoreSpec::Analytic(dist, predictor))
    }

    pub fn uniform_perfect() -> Self {
        Self::analytic(TrueScoreDistribution::Uniform01, Predictor::Perfect)
            .expect("uniform perfect model is valid")
    }

    pub fn empirical_joint(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(JointScoreSpec::EmpiricalJoint(
            pairs
                .into_iter()
                .map(|(predicted, true_score)| ScorePair { predicted, true_score })
                .collect(),
        ))
    }

    pub fn empirical_labeled(rows: impl IntoIterator<Item = (f64, bool)>) -> Result<Self> {
        Self::new(JointScoreSpec::EmpiricalLabeled(
            rows.into_iter()
                .map(|(predicted, outcome)| LabeledScore { predicted, outcome })
                .collect(),
        ))
    }

    pub fn spec(&self) -> &JointScoreSpec {
        &self.spec
    }

    /// True when the law is continuous enough for the first-order-condition
    /// path (analytic uniform or beta-mixture true scores).
    pub fn is_continuous(&self) -> bool {
        match &self.spec {
            JointScoreSpec::Analytic(d, _) => d.is_continuous(),
            _ => false,
        }
    }

    pub fn is_labeled(&self) -> bool {
        matches!(self.spec, JointScoreSpec::EmpiricalLabeled(_))
    }

    /// `E[r]`, or the positive rate for labeled corpora.
    pub fn mean_true_score(&self) -> f64 {
        match &*self.engine {
            Engine::Continuous(d) => d.mean(),
            Engine::Noisy(e) => e.mean,
            Engine::Table(t) => t.mean(),
        }
    }

    /// Population `τ`-quantile of the predicted score.
    pub fn predicted_quantile(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(match &*self.engine {
            Engine::Continuous(d) => d.quantile(tau),
            Engine::Noisy(e) => e.quantile(tau),
            Engine::Table(t) => order_statistic(&t.sorted_predicted, tau),
        })
    }

    /// Flagged mass `L(τ) = E[r · 1{in the top 1-τ by r̂}] = (1-τ) E[r | r̂ ≥ q(τ)]`.
    ///
    /// Defined on all of `[0, 1]`; `L(0) = E[r]`, `L(1) = 0`. Ties in `r̂`
    /// share the flagged mass in proportion, so `L` is continuous and
    /// nonincreasing for every model.
    pub fn flagged_mass(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(self.flagged_mass_unchecked(tau))
    }

    pub(crate) fn flagged_mass_unchecked(&self, tau: f64) -> f64 {
        match &*self.engine {
            Engine::Continuous(d) => {
                if tau >= 1.0 {
                    0.0
                } else if tau <= 0.0 {
                    d.mean()
                } else {
                    d.upper_partial_moment(d.quantile(tau))
                }
            }
            Engine::Noisy(e) => e.flagged_mass(tau),
            Engine::Table(t) => t.flagged_mass(tau),
        }
    }

    /// `E[r | r̂ ≥ q(τ)]`.
    pub fn conditional_mean_above(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        if tau >= 1.0 {
            return Err(Error::EmptyTail { tau });
        }
        if let Engine::Table(t) = &*self.engine {
            if t.flagged_count(tau) == 0 {
                return Err(Error::EmptyTail { tau });
            }
        }
        Ok(self.flagged_mass_unchecked(tau) / (1.0 - tau))
    }

    /// `E[r | r̂ = q(τ)]`. Empirical models use [`DEFAULT_BIN_WIDTH`].
    pub fn conditional_mean_at(&self, tau: f64) -> Result<f64> {
        self.conditional_mean_at_with_bin(tau, DEFAULT_BIN_WIDTH)
    }

    /// `E[r | r̂ = q(τ)]`; `bin_width` (quantile units) only matters for
    /// empirical models, which average `r` over the rank window
    /// `[τ - w/2, τ + w/2]` and require at least `2 / w` points in it.
    pub fn conditional_mean_at_with_bin(&self, tau: f64, bin_width: f64) -> Result<f64> {
        check_tau(tau)?;
        match &*self.engine {
            Engine::Continuous(d) => Ok(d.quantile(tau)),
            Engine::Noisy(_) => Ok(self.mass_derivative(tau, DERIVATIVE_STEP)),
            Engine::Table(t) => {
                if !(bin_width > 0.0 && bin_width <= 1.0) {
                    return Err(invalid("bin_width", "must lie in (0, 1]"));
                }
                let per_bin = t.len() as f64 * bin_width;
                if per_bin < 2.0 / bin_width {
                    return Err(Error::InsufficientResolution(format!(
                        "{per_bin:.1} points per bin of width {bin_width}, need at least {:.1}",
                        2.0 / bin_width
                    )));
                }
                Ok(self.mass_derivative(tau, 0.5 * bin_width))
            }
        }
    }

    /// `-dL/dτ` by central difference, one-sided at the ends of `[0, 1]`.
    fn mass_derivative(&self, tau: f64, h: f64) -> f64 {
        let (lo, hi) = if tau - h < 0.0 {
            (0.0, (2.0 * h).min(1.0))
        } else if tau + h > 1.0 {
            ((1.0 - 2.0 * h).max(0.0), 1.0)
        } else {
            (tau - h, tau + h)
        };
        (self.flagged_mass_unchecked(lo) - self.flagged_mass_unchecked(hi)) / (hi - lo)
    }

    /// `TPR(q(τ)) = L(τ) / E[r]`.
    pub fn tpr_at(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let mean = self.mean_true_score();
        if mean <= 0.0 {
            return Err(Error::NoPositives);
        }
        Ok((self.flagged_mass_unchecked(tau) / mean).clamp(0.0, 1.0))
    }

    /// Builds a reusable sampler for i.i.d. draws of `(r, r̂)`.
    pub fn sampler(&self) -> PopulationSampler {
        PopulationSampler::new(&self.spec)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(invalid("tau", format!("{tau} is outside [0, 1]")))
    }
}

fn validate_unit_list(field: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut any = false;
    for (i, v) in values.enumerate() {
        any = true;
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(format!("{field}[{i}]"), format!("{v} is outside [0, 1]")));
        }
    }
    if any {
        Ok(())
    } else {
        Err(invalid(field, "list is empty"))
    }
}

/// The `⌈τn⌉`-th ascending order statistic (the minimum at `τ = 0`).
fn order_statistic(sorted: &[f64], tau: f64) -> f64 {
    let n = sorted.len();
    let rank = (tolerant_ceil(tau * n as f64) as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Number flagged when the top `1-τ` of `n` are selected: `n - ⌈τn⌉`.
pub fn flagged_count(n: usize, tau: f64) -> usize {
    let excluded = (tolerant_ceil(tau * n as f64) as usize).min(n);
    n - excluded
}

#[derive(Debug)]
struct NoisyEngine {
    r: Vec<f64>,
    w: Vec<f64>,
    sigma: f64,
    mean: f64,
    /// Mass and `r`-moment of the clipping atom at 0.
    atom0: f64,
    atom0_moment: f64,
    /// Mass and `r`-moment of the clipping atom at 1.
    atom1: f64,
    atom1_moment: f64,
    /// `E[r · 1{r̂ > 0}]`.
    above_zero: f64,
}

impl NoisyEngine {
    fn new(dist: &TrueScoreDistribution, sigma: f64) -> Self {
        let (r, w) = match dist {
            TrueScoreDistribution::EmpiricalScores(s) => {
                let w = 1.0 / s.len() as f64;
                (s.clone(), vec![w; s.len()])
            }
            d => {
                // Integrate in probability space so density singularities of
                // the true-score law never reach the quadrature.
                let rule = CompositeRule::new(0.0, 1.0, QUAD_PANELS, QUAD_ORDER);
                let r = rule.nodes.iter().map(|&u| d.quantile(u)).collect();
                (r, rule.weights)
            }
        };
        let mut e = Self {
            r,
            w,
            sigma,
            mean: 0.0,
            atom0: 0.0,
            atom0_moment: 0.0,
            atom1: 0.0,
            atom1_moment: 0.0,
            above_zero: 0.0,
        };
        for (&r, &w) in e.r.iter().zip(&e.w) {
            let p0 = normal_cdf(-r / sigma);
            let p1 = normal_cdf((r - 1.0) / sigma);
            e.mean += w * r;
            e.atom0 += w * p0;
            e.atom0_moment += w * r * p0;
            e.atom1 += w * p1;
            e.atom1_moment += w * r * p1;
        }
        e.above_zero = e.upper_moment(0.0);
        e
    }

    /// `P(r̂ ≤ s)` for `s ∈ [0, 1)`.
    fn cdf(&self, s: f64) -> f64 {
        self.r
            .iter()
            .zip(&self.w)
            .map(|(&r, &w)| w * normal_cdf((s - r) / self.sigma))
            .sum()
    }

    fn density(&self, s: f64) -> f64 {
        self.r
            .iter()
            .zip(&self.w)
            .map(|(&r, &w)| w * normal_pdf((s - r) / self.sigma))
            .sum::<f64>()
            / self.sigma
    }

    /// `E[r · 1{r̂ > s}]` for `s ∈ [0, 1)`.
    fn upper_moment(&self, s: f64) -> f64 {
        self.r
            .iter()
            .zip(&self.w)
            .map(|(&r, &w)| w * r * normal_cdf((r - s) / self.sigma))
            .sum()
    }

    fn quantile(&self, tau: f64) -> f64 {
        if tau <= self.atom0 {
            0.0
        } else if tau >= 1.0 - self.atom1 {
            1.0
        } else {
            self.interior_quantile(tau)
        }
    }

    fn interior_quantile(&self, tau: f64) -> f64 {
        solve_increasing(|s| self.cdf(s), |s| self.density(s), tau, 0.0, 1.0, QUANTILE_TOL)
    }

    fn flagged_mass(&self, tau: f64) -> f64 {
        let top = 1.0 - tau;
        if top <= 0.0 {
            0.0
        } else if top <= self.atom1 {
            top * self.atom1_moment / self.atom1
        } else if tau < self.atom0 {
            self.above_zero + (self.atom0 - tau) * self.atom0_moment / self.atom0
        } else {
            self.upper_moment(self.interior_quantile(tau))
        }
    }
}

#[derive(Debug)]
struct EmpiricalTable {
    sorted_predicted: Vec<f64>,
    /// `top_cum[j]` is the sum of `r` over the `j` highest predicted scores,
    /// with `r` averaged inside groups of tied predictions.
    top_cum: Vec<f64>,
}

impl EmpiricalTable {
    fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut smoothed = Vec::with_capacity(pairs.len());
        let mut i = 0;
        while i < pairs.len() {
            let mut j = i;
            let mut sum = 0.0;
            while j < pairs.len() && pairs[j].0 == pairs[i].0 {
                sum += pairs[j].1;
                j += 1;
            }
            let avg = sum / (j - i) as f64;
            smoothed.extend(std::iter::repeat_n(avg, j - i));
            i = j;
        }
        let mut top_cum = Vec::with_capacity(pairs.len() + 1);
        top_cum.push(0.0);
        let mut acc = 0.0;
        for r in smoothed {
            acc += r;
            top_cum.push(acc);
        }
        let mut sorted_predicted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        sorted_predicted.reverse();
        Self {
            sorted_predicted,
            top_cum,
        }
    }

    fn len(&self) -> usize {
        self.sorted_predicted.len()
    }

    fn mean(&self) -> f64 {
        self.top_cum[self.len()] / self.len() as f64
    }

    fn flagged_count(&self, tau: f64) -> usize {
        flagged_count(self.len(), tau)
    }

    fn flagged_mass(&self, tau: f64) -> f64 {
        let n = self.len();
        let x = (n as f64 * (1.0 - tau)).clamp(0.0, n as f64);
        let j = (x.floor() as usize).min(n);
        let frac = x - j as f64;
        let mut sum = self.top_cum[j];
        if j < n {
            sum += frac * (self.top_cum[j + 1] - self.top_cum[j]);
        }
        sum / n as f64
    }
}

/// One sampled individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub true_score: f64,
    pub predicted: f64,
    /// Realized binary outcome; present only for binary-mode draws.
    pub outcome: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    pub individuals: Vec<Individual>,
}

impl Population {
    pub fn from_scores(true_scores: &[f64], predicted: &[f64]) -> Self {
        assert_eq!(true_scores.len(), predicted.len());
        Self {
            individuals: true_scores
                .iter()
                .zip(predicted)
                .map(|(&true_score, &predicted)| Individual {
                    true_score,
                    predicted,
                    outcome: None,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn mean_true_score(&self) -> f64 {
        self.individuals.iter().map(|i| i.true_score).sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone)]
enum SourceLaw {
    Uniform,
    Mixture {
        cumulative: Vec<f64>,
        components: Vec<Beta<f64>>,
    },
    Discrete(Vec<f64>),
    Pairs(Vec<(f64, f64)>),
    Labeled(Vec<(f64, bool)>),
}

/// Draws i.i.d. individuals from a joint score law.
///
/// Draws per individual are consumed in a fixed order: mixture component,
/// true score, prediction noise, outcome.
#[derive(Debug, Clone)]
pub struct PopulationSampler {
    law: SourceLaw,
    sigma: f64,
}

impl PopulationSampler {
    fn new(spec: &JointScoreSpec) -> Self {
        match spec {
            JointScoreSpec::Analytic(dist, predictor) => {
                let sigma = match predictor {
                    Predictor::Perfect => 0.0,
                    Predictor::GaussianNoiseClipped { sigma } => *sigma,
                };
                let law = match dist {
                    TrueScoreDistribution::Uniform01 => SourceLaw::Uniform,
                    TrueScoreDistribution::BetaMixture(cs) => {
                        let mut acc = 0.0;
                        let cumulative = cs
                            .iter()
                            .map(|c| {
                                acc += c.weight;
                                acc
                            })
                            .collect();
                        let components = cs
                            .iter()
                            .map(|c| Beta::new(c.alpha, c.beta).expect("validated beta parameters"))
                            .collect();
                        SourceLaw::Mixture {
                            cumulative,
                            components,
                        }
                    }
                    TrueScoreDistribution::EmpiricalScores(s) => SourceLaw::Discrete(s.clone()),
                };
                Self { law, sigma }
            }
            JointScoreSpec::EmpiricalJoint(pairs) => Self {
                law: SourceLaw::Pairs(pairs.iter().map(|p| (p.predicted, p.true_score)).collect()),
                sigma: 0.0,
            },
            JointScoreSpec::EmpiricalLabeled(rows) => Self {
                law: SourceLaw::Labeled(rows.iter().map(|p| (p.predicted, p.outcome)).collect()),
                sigma: 0.0,
            },
        }
    }

    /// Size of the underlying corpus for empirical laws.
    pub fn corpus_len(&self) -> Option<usize> {
        match &self.law {
            SourceLaw::Discrete(s) => Some(s.len()),
            SourceLaw::Pairs(p) => Some(p.len()),
            SourceLaw::Labeled(p) => Some(p.len()),
            _ => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, binary_mode: bool) -> Individual {
        match &self.law {
            SourceLaw::Labeled(rows) => {
                let (predicted, y) = rows[rng.random_range(0..rows.len())];
                return labeled_individual(predicted, y, binary_mode);
            }
            SourceLaw::Pairs(pairs) => {
                let (predicted, true_score) = pairs[rng.random_range(0..pairs.len())];
                return self.finish(rng, true_score, Some(predicted), binary_mode);
            }
            _ => {}
        }
        let r = match &self.law {
            SourceLaw::Uniform => rng.random::<f64>(),
            SourceLaw::Mixture {
                cumulative,
                components,
            } => {
                let k = if components.len() == 1 {
                    0
                } else {
                    let u: f64 = rng.random();
                    cumulative
                        .iter()
                        .position(|&c| u < c)
                        .unwrap_or(components.len() - 1)
                };
                components[k].sample(rng)
            }
            SourceLaw::Discrete(s) => s[rng.random_range(0..s.len())],
            SourceLaw::Pairs(_) | SourceLaw::Labeled(_) => unreachable!(),
        };
        self.finish(rng, r, None, binary_mode)
    }

    /// Draws corpus record `index` (empirical laws only).
    fn draw_record<R: Rng + ?Sized>(&self, rng: &mut R, index: usize, binary_mode: bool) -> Individual {
        match &self.law {
            SourceLaw::Labeled(rows) => {
                let (predicted, y) = rows[index];
                labeled_individual(predicted, y, binary_mode)
            }
            SourceLaw::Pairs(pairs) => {
                let (predicted, true_score) = pairs[index];
                self.finish(rng, true_score, Some(predicted), binary_mode)
            }
            SourceLaw::Discrete(s) => self.finish(rng, s[index], None, binary_mode),
            _ => unreachable!("record draws need an empirical corpus"),
        }
    }

    fn finish<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        true_score: f64,
        predicted: Option<f64>,
        binary_mode: bool,
    ) -> Individual {
        let predicted = predicted.unwrap_or_else(|| {
            if self.sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                (true_score + self.sigma * z).clamp(0.0, 1.0)
            } else {
                true_score
            }
        });
        let outcome = binary_mode.then(|| rng.random::<f64>() < true_score);
        Individual {
            true_score,
            predicted,
            outcome,
        }
    }

    /// Fills `out` with `n` i.i.d. draws.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, binary_mode: bool, out: &mut Vec<Individual>) {
        out.clear();
        out.extend((0..n).map(|_| self.draw(rng, binary_mode)));
    }
}

fn labeled_individual(predicted: f64, y: bool, binary_mode: bool) -> Individual {
    Individual {
        true_score: if y { 1.0 } else { 0.0 },
        predicted,
        outcome: binary_mode.then_some(y),
    }
}

/// `n` i.i.d. draws of `(r, r̂)`; in binary mode each individual also
/// carries `y ~ Bernoulli(r)` (or its recorded outcome for labeled corpora).
pub fn sample_population(model: &JointScoreModel, n: usize, binary_mode: bool, seed: u64) -> Result<Population> {
    if n == 0 {
        return Err(invalid("n", "population size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut individuals = Vec::with_capacity(n);
    model.sampler().fill(&mut rng, n, binary_mode, &mut individuals);
    Ok(Population { individuals })
}

/// Draws `n` distinct records from an empirical corpus, in random order.
pub fn sample_population_without_replacement(
    model: &JointScoreModel,
    n: usize,
    binary_mode: bool,
    seed: u64,
) -> Result<Population> {
    let sampler = model.sampler();
    let Some(len) = sampler.corpus_len() else {
        return Err(Error::Unsupported(
            "sampling without replacement needs an empirical corpus".into(),
        ));
    };
    if n == 0 || n > len {
        return Err(invalid("n", format!("must lie in 1..={len} without replacement")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, len, n);
    let individuals = picks
        .iter()
        .map(|i| sampler.draw_record(&mut rng, i, binary_mode))
        .collect();
    Ok(Population { individuals })
}
