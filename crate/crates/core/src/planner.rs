//! Fluid model and threshold selection.
//!
//! The fluid model replaces the random request count by its mean and the
//! empirical score quantile by the population quantile. Everything here is a
//! deterministic function of the score model and the behavioral parameters.

use crate::error::{invalid, Error, Result};
use crate::numeric::{bisect_decreasing, linspace};
use crate::par::{map_indexed, Execution};
use crate::score_model::{JointScoreModel, JointScoreSpec, Predictor};

/// Grid used to maximize efficacy for models without a usable first-order condition.
pub const DEFAULT_GRID: usize = 2001;

/// Bisection tolerance in `τ` for the score-optimal root.
pub const ROOT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehavioralParams {
    pub p0: f64,
    pub delta_p: f64,
}

impl BehavioralParams {
    pub fn new(p0: f64, delta_p: f64) -> Result<Self> {
        let p = Self { p0, delta_p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0.is_finite() && (0.0..=1.0).contains(&self.p0)) {
            return Err(invalid("p0", format!("{} is outside [0, 1]", self.p0)));
        }
        if !(self.delta_p.is_finite() && (0.0..=1.0).contains(&self.delta_p)) {
            return Err(invalid("delta_p", format!("{} is outside [0, 1]", self.delta_p)));
        }
        if self.p0 + self.delta_p > 1.0 + 1e-12 {
            return Err(invalid(
                "delta_p",
                format!("p0 + delta_p = {} exceeds 1", self.p0 + self.delta_p),
            ));
        }
        Ok(())
    }

    /// Request probability of a flagged individual.
    pub fn flagged_rate(&self) -> f64 {
        self.p0 + self.delta_p
    }

    /// Expected requests per individual when the top `1-τ` are flagged.
    pub fn demand_rate(&self, tau: f64) -> f64 {
        self.p0 + self.delta_p * (1.0 - tau)
    }
}

/// One evaluation of the fluid model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidPoint {
    pub tau: f64,
    /// Expected number served, `min(n · demand, m)`.
    pub n_served: f64,
    /// Expected true score per served request.
    pub r_per_slot: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    Fixed(f64),
    CapacityMatching,
    ScoreOptimal,
    TwoPointOptimal,
    /// Argmax of the fluid objective over an evenly spaced grid of this size.
    GridOracle(usize),
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed(t) if !(0.0..=1.0).contains(&t) => {
                Err(invalid("policy.fixed", format!("{t} is outside [0, 1]")))
            }
            Self::GridOracle(g) if g < 2 => Err(invalid("policy.grid_oracle", "grid size must be at least 2")),
            _ => Ok(()),
        }
    }

    /// Stable label used in tables and summaries.
    pub fn label(&self) -> String {
        match self {
            Self::Fixed(t) => format!("fixed({t})"),
            Self::CapacityMatching => "capacity_matching".into(),
            Self::ScoreOptimal => "score_optimal".into(),
            Self::TwoPointOptimal => "two_point".into(),
            Self::GridOracle(g) => format!("grid_oracle({g})"),
        }
    }

    /// Threshold chosen at capacity ratio `rho`.
    pub fn resolve(&self, rho: f64, model: &JointScoreModel, params: &BehavioralParams) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::Fixed(t) => Ok(t),
            Self::CapacityMatching => Ok(capacity_matching_threshold(rho, params)),
            Self::ScoreOptimal => score_optimal_threshold(model, params),
            Self::TwoPointOptimal => two_point_threshold(rho, model, params),
            Self::GridOracle(g) => Ok(fluid_grid_argmax(g, 1.0, rho, model, params)),
        }
    }
}

/// The `τ` at which expected demand equals capacity, clamped to `[0, 1]`.
pub fn capacity_matching_threshold(rho: f64, params: &BehavioralParams) -> f64 {
    if params.delta_p == 0.0 {
        return if rho <= params.p0 { 1.0 } else { 0.0 };
    }
    (1.0 - (rho - params.p0) / params.delta_p).clamp(0.0, 1.0)
}

/// Expected number served, `min(n (p0 + ΔP (1-τ)), m)`.
pub fn fluid_served(tau: f64, n: f64, m: f64, params: &BehavioralParams) -> f64 {
    (n * params.demand_rate(tau)).min(m)
}

/// Expected true score per served request.
pub fn fluid_efficacy(tau: f64, model: &JointScoreModel, params: &BehavioralParams) -> Result<f64> {
    let demand = params.demand_rate(tau);
    if demand <= 0.0 {
        return Err(Error::NoRequests { tau });
    }
    let tail = model.flagged_mass(tau)?;
    Ok((params.p0 * model.mean_true_score() + params.delta_p * tail) / demand)
}

pub fn fluid_point(
    tau: f64,
    model: &JointScoreModel,
    n: f64,
    m: f64,
    params: &BehavioralParams,
) -> Result<FluidPoint> {
    let n_served = fluid_served(tau, n, m, params);
    let r_per_slot = if n_served == 0.0 && params.demand_rate(tau) == 0.0 {
        0.0
    } else {
        fluid_efficacy(tau, model, params)?
    };
    Ok(FluidPoint {
        tau,
        n_served,
        r_per_slot,
        objective: n_served * r_per_slot,
    })
}

/// Fluid objective `min(n · demand, m) · R̃(τ)`; zero when nobody requests.
pub fn fluid_objective(
    tau: f64,
    model: &JointScoreModel,
    n: f64,
    m: f64,
    params: &BehavioralParams,
) -> Result<f64> {
    Ok(fluid_point(tau, model, n, m, params)?.objective)
}

/// First-order function whose root is the score-optimal threshold. Positive
/// where efficacy per slot still increases with `τ`.
pub fn h_function(tau: f64, model: &JointScoreModel, params: &BehavioralParams) -> Result<f64> {
    if params.delta_p == 0.0 {
        return Err(Error::InertNudge);
    }
    let tail = model.flagged_mass(tau)?;
    let at = model.conditional_mean_at(tau)?;
    Ok(tail - (1.0 - tau) * at - params.p0 / params.delta_p * (at - model.mean_true_score()))
}

/// Threshold maximizing efficacy per served slot.
pub fn score_optimal_threshold(model: &JointScoreModel, params: &BehavioralParams) -> Result<f64> {
    score_optimal_threshold_with_grid(model, params, DEFAULT_GRID)
}

/// As [`score_optimal_threshold`]; `grid` only applies to models solved by
/// grid search (empirical corpora).
pub fn score_optimal_threshold_with_grid(
    model: &JointScoreModel,
    params: &BehavioralParams,
    grid: usize,
) -> Result<f64> {
    params.validate()?;
    if params.delta_p == 0.0 {
        return Err(Error::InertNudge);
    }
    if params.p0 == 0.0 {
        return Ok(1.0);
    }
    if !model.is_continuous() {
        if grid < 2 {
            return Err(invalid("grid_size", "must be at least 2"));
        }
        return Ok(grid_argmax(grid, |tau| fluid_efficacy(tau, model, params).unwrap_or(f64::NEG_INFINITY)));
    }
    let h = |tau: f64| h_function(tau, model, params).expect("tau within [0, 1]");
    if h(0.0) <= 0.0 {
        return Ok(0.0);
    }
    Ok(bisect_decreasing(h, 0.0, 1.0, ROOT_TOL))
}

/// Smallest maximizer of `f` over an evenly spaced grid on `[0, 1]`.
fn grid_argmax(grid: usize, f: impl Fn(f64) -> f64) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for tau in linspace(0.0, 1.0, grid) {
        let v = f(tau);
        if v > best.0 {
            best = (v, tau);
        }
    }
    best.1
}

/// Grid argmax of the fluid objective at capacity ratio `rho` (per unit `n`).
pub fn fluid_grid_argmax(
    grid: usize,
    n: f64,
    rho: f64,
    model: &JointScoreModel,
    params: &BehavioralParams,
) -> f64 {
    grid_argmax(grid, |tau| {
        fluid_objective(tau, model, n, rho * n, params).unwrap_or(f64::NEG_INFINITY)
    })
}

/// `min(τ*_score, τ_c)`, the fluid-optimal threshold.
pub fn two_point_threshold(rho: f64, model: &JointScoreModel, params: &BehavioralParams) -> Result<f64> {
    let score = score_optimal_threshold(model, params)?;
    Ok(two_point_from(score, rho, params))
}

fn two_point_from(score_optimal: f64, rho: f64, params: &BehavioralParams) -> f64 {
    score_optimal.min(capacity_matching_threshold(rho, params))
}

/// Which constraint sets the fluid-optimal threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Demand at the score-optimal threshold already fills capacity.
    CannibalizationBound,
    /// Capacity is left over at the score-optimal threshold, so flagging widens.
    UtilizationBound,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::CannibalizationBound => "cannibalization-bound",
            Regime::UtilizationBound => "utilization-bound",
        }
    }
}

pub fn regime(score_optimal: f64, rho: f64, params: &BehavioralParams) -> Regime {
    if capacity_matching_threshold(rho, params) < score_optimal {
        Regime::UtilizationBound
    } else {
        Regime::CannibalizationBound
    }
}

/// Smallest `p0` at which the score-optimal threshold no longer exceeds the
/// capacity-matching one.
pub fn critical_baseline(rho: f64, model: &JointScoreModel, delta_p: f64) -> Result<f64> {
    if !(delta_p > 0.0 && delta_p < 1.0) {
        return Err(invalid("delta_p", "must lie in (0, 1)"));
    }
    if rho.is_nan() || rho < 0.0 {
        return Err(invalid("rho", "must be nonnegative"));
    }
    let diff = |p0: f64| -> f64 {
        let params = BehavioralParams { p0, delta_p };
        score_optimal_threshold(model, &params).expect("validated parameters")
            - capacity_matching_threshold(rho, &params)
    };
    let top = 1.0 - delta_p;
    if diff(0.0) <= 0.0 {
        return Ok(0.0);
    }
    if diff(top) > 0.0 {
        return Ok(top);
    }
    let mut lo = 0.0;
    let mut hi = top;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if diff(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Parameter swept by [`gap_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Capacity ratio `m / n`, at fixed `p0`.
    Rho,
    /// Baseline request probability, at fixed capacity ratio.
    P0,
}

/// One point of a suboptimality curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub x: f64,
    pub tau_policy: f64,
    pub tau_optimal: f64,
    pub objective_policy: f64,
    pub objective_optimal: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

/// Fixed quantities of a sweep: the population size, and the value of the
/// axis that is not swept (`rho` for a `p0` sweep and vice versa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBase {
    pub n: f64,
    pub rho: f64,
    pub params: BehavioralParams,
}

/// Fluid gap between the two-point threshold and `policy` along a sweep.
pub fn gap_curve(
    policy: ThresholdPolicy,
    axis: SweepAxis,
    grid: &[f64],
    model: &JointScoreModel,
    base: &SweepBase,
) -> Result<Vec<GapPoint>> {
    gap_curve_with(policy, axis, grid, model, base, Execution::default())
}

pub fn gap_curve_with(
    policy: ThresholdPolicy,
    axis: SweepAxis,
    grid: &[f64],
    model: &JointScoreModel,
    base: &SweepBase,
    exec: Execution,
) -> Result<Vec<GapPoint>> {
    policy.validate()?;
    base.params.validate()?;
    // Along a rho sweep the score-optimal threshold is constant.
    let cached = match axis {
        SweepAxis::Rho => Some(score_optimal_threshold(model, &base.params)?),
        SweepAxis::P0 => None,
    };
    map_indexed(exec, grid.len(), |i| {
        let x = grid[i];
        let (rho, params) = match axis {
            SweepAxis::Rho => (x, base.params),
            SweepAxis::P0 => (base.rho, BehavioralParams::new(x, base.params.delta_p)?),
        };
        if rho.is_nan() || rho < 0.0 {
            return Err(invalid("rho", format!("{rho} is negative")));
        }
        let score = match cached {
            Some(s) => s,
            None => score_optimal_threshold(model, &params)?,
        };
        let tau_optimal = two_point_from(score, rho, &params);
        let tau_policy = match policy {
            ThresholdPolicy::ScoreOptimal => score,
            ThresholdPolicy::TwoPointOptimal => tau_optimal,
            p => p.resolve(rho, model, &params)?,
        };
        let m = rho * base.n;
        let objective_optimal = fluid_objective(tau_optimal, model, base.n, m, &params)?;
        let objective_policy = fluid_objective(tau_policy, model, base.n, m, &params)?;
        let gap = (objective_optimal - objective_policy).max(0.0);
        let relative_gap = if objective_optimal > 0.0 {
            (gap / objective_optimal).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok(GapPoint {
            x,
            tau_policy,
            tau_optimal,
            objective_policy,
            objective_optimal,
            gap,
            relative_gap,
        })
    })
    .into_iter()
    .collect()
}

/// Largest relative loss of capacity matching over all capacity ratios,
/// `1 - E[r] / R̃(τ*_score)`.
pub fn max_relative_gap_capacity_matching(model: &JointScoreModel, params: &BehavioralParams) -> Result<f64> {
    let score = score_optimal_threshold(model, params)?;
    let best = if score >= 1.0 {
        // Only the flagged group requests; efficacy per slot tends to the
        // mean true score of the very top of the ranking.
        top_limit_mean(model)?
    } else {
        fluid_efficacy(score, model, params)?
    };
    if best <= 0.0 {
        return Ok(0.0);
    }
    Ok(((best - model.mean_true_score()) / best).clamp(0.0, 1.0))
}

/// `lim_{τ→1} E[r | r̂ ≥ q(τ)]`.
fn top_limit_mean(model: &JointScoreModel) -> Result<f64> {
    if model.is_continuous() {
        if let JointScoreSpec::Analytic(_, Predictor::Perfect) = model.spec() {
            return model.conditional_mean_at(1.0);
        }
    }
    let tau = 1.0 - 1e-12;
    Ok(model.flagged_mass(tau)? / (1.0 - tau))
}
