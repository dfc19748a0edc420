//! Predictive (ROC, AUC) and operational (OpAUC) evaluation of scoring
//! algorithms, and selection between candidates.

use crate::error::{invalid, Error, Result};
use crate::numeric::linspace;
use crate::par::{map_indexed, Execution};
use crate::planner::{capacity_matching_threshold, score_optimal_threshold, BehavioralParams};
use crate::score_model::{JointScoreModel, JointScoreSpec};

/// Points of the `τ`-grid used for AUC integrals.
pub const AUC_GRID: usize = 2001;
/// Nodes of the trapezoid rule over a uniform capacity range.
pub const CAPACITY_NODES: usize = 201;

/// Mann–Whitney AUC with half credit for tied scores.
pub fn auc_rank(labeled: &[(f64, bool)]) -> Result<f64> {
    let positives = labeled.iter().filter(|p| p.1).count();
    let negatives = labeled.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::AucUndefined("need at least one positive and one negative".into()));
    }
    let mut sorted: Vec<(f64, bool)> = labeled.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let midrank = (i + j + 1) as f64 / 2.0;
        rank_sum += midrank * sorted[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

fn check_binary_mean(model: &JointScoreModel) -> Result<f64> {
    let mean = model.mean_true_score();
    if mean <= 0.0 || mean >= 1.0 {
        return Err(Error::AucUndefined(format!("mean true score {mean} leaves one class empty")));
    }
    Ok(mean)
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// AUC from the TPR curve: `(∫ TPR dτ - E[r]/2) / (1 - E[r])`.
pub fn auc_integral(model: &JointScoreModel) -> Result<f64> {
    let mean = check_binary_mean(model)?;
    let taus = linspace(0.0, 1.0, AUC_GRID);
    let tpr = taus
        .iter()
        .map(|&t| model.tpr_at(t))
        .collect::<Result<Vec<_>>>()?;
    Ok((trapezoid(&taus, &tpr) - mean / 2.0) / (1.0 - mean))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub tau: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve traced over an evenly spaced `τ`-grid, from `(1, 1)` at `τ = 0`
/// to `(0, 0)` at `τ = 1`.
pub fn roc_curve(model: &JointScoreModel, grid_size: usize) -> Result<Vec<RocPoint>> {
    if grid_size < 2 {
        return Err(invalid("grid_size", "must be at least 2"));
    }
    let mean = check_binary_mean(model)?;
    linspace(0.0, 1.0, grid_size)
        .into_iter()
        .map(|tau| {
            let tpr = model.tpr_at(tau)?;
            let fpr = (((1.0 - tau) - tpr * mean) / (1.0 - mean)).clamp(0.0, 1.0);
            Ok(RocPoint { tau, fpr, tpr })
        })
        .collect()
}

/// Law of the capacity ratio `ρ = m / n` over deployment sites.
#[derive(Debug, Clone, PartialEq)]
pub enum CapacityDistribution {
    UniformRatio { lo: f64, hi: f64 },
    Atoms { atoms: Vec<CapacityAtom> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityAtom {
    pub rho: f64,
    pub weight: f64,
}

impl CapacityDistribution {
    pub fn atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let d = Self::Atoms {
            atoms: atoms.into_iter().map(|(rho, weight)| CapacityAtom { rho, weight }).collect(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::UniformRatio { lo, hi } => {
                if !(lo.is_finite() && *lo >= 0.0) {
                    return Err(invalid("mu.lo", "must be nonnegative"));
                }
                if !(hi.is_finite() && hi > lo) {
                    return Err(invalid("mu.hi", "must exceed mu.lo"));
                }
            }
            Self::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(invalid("mu.atoms", "need at least one atom"));
                }
                let mut total = 0.0;
                for (i, a) in atoms.iter().enumerate() {
                    if !(a.rho.is_finite() && a.rho > 0.0) {
                        return Err(invalid(format!("mu.atoms[{i}].rho"), "must be positive"));
                    }
                    if !(a.weight.is_finite() && a.weight >= 0.0) {
                        return Err(invalid(format!("mu.atoms[{i}].weight"), "must be nonnegative"));
                    }
                    total += a.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid("mu.atoms", format!("weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    /// Quadrature nodes `(ρ, weight)` whose weighted sum integrates against the law.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match self {
            Self::UniformRatio { lo, hi } => {
                let xs = linspace(*lo, *hi, CAPACITY_NODES);
                let w = 1.0 / (CAPACITY_NODES - 1) as f64;
                xs.into_iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let end = i == 0 || i + 1 == CAPACITY_NODES;
                        (x, if end { 0.5 * w } else { w })
                    })
                    .collect()
            }
            Self::Atoms { atoms } => atoms.iter().map(|a| (a.rho, a.weight)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::UniformRatio { lo, hi } => 0.5 * (lo + hi),
            Self::Atoms { atoms } => atoms.iter().map(|a| a.rho * a.weight).sum(),
        }
    }
}

/// Contribution of one capacity ratio to OpAUC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpaucPoint {
    pub rho: f64,
    pub weight: f64,
    /// Fluid-optimal threshold at this capacity ratio.
    pub tau: f64,
    pub tpr: f64,
    /// `ρ (p₀ + ΔP · TPR) / (p₀ + ΔP (1-τ))`.
    pub integrand: f64,
}

/// Per-node OpAUC integrand table.
pub fn opauc_table(
    model: &JointScoreModel,
    mu: &CapacityDistribution,
    params: &BehavioralParams,
) -> Result<Vec<OpaucPoint>> {
    mu.validate()?;
    check_binary_mean(model)?;
    let score = score_optimal_threshold(model, params)?;
    mu.nodes()
        .into_iter()
        .map(|(rho, weight)| {
            let tau = score.min(capacity_matching_threshold(rho, params));
            let tpr = model.tpr_at(tau)?;
            let demand = params.demand_rate(tau);
            let integrand = if demand > 0.0 {
                rho * (params.p0 + params.delta_p * tpr) / demand
            } else {
                0.0
            };
            Ok(OpaucPoint {
                rho,
                weight,
                tau,
                tpr,
                integrand,
            })
        })
        .collect()
}

/// Operational AUC: the capacity-weighted efficacy of the algorithm at its
/// own fluid-optimal thresholds, in units of `n · E[r]`.
pub fn opauc(model: &JointScoreModel, mu: &CapacityDistribution, params: &BehavioralParams) -> Result<f64> {
    Ok(opauc_table(model, mu, params)?
        .iter()
        .map(|p| p.weight * p.integrand)
        .sum())
}

/// OpAUC for `ρ ~ Uniform[lo, hi]` when capacity matching binds across the
/// whole range, as an integral of TPR over thresholds.
pub fn opauc_uniform_closed_form(
    model: &JointScoreModel,
    lo: f64,
    hi: f64,
    params: &BehavioralParams,
) -> Result<f64> {
    CapacityDistribution::UniformRatio { lo, hi }.validate()?;
    check_binary_mean(model)?;
    let score = score_optimal_threshold(model, params)?;
    let top = capacity_matching_threshold(lo, params);
    if top > score {
        return Err(Error::RegimeViolated(format!(
            "capacity-matching threshold {top} at rho = {lo} exceeds score-optimal {score}"
        )));
    }
    if hi > params.flagged_rate() {
        return Err(Error::RegimeViolated(format!(
            "rho = {hi} exceeds p0 + delta_p, where flagging saturates"
        )));
    }
    let bottom = capacity_matching_threshold(hi, params);
    let taus = linspace(bottom, top, AUC_GRID);
    let values = taus
        .iter()
        .map(|&t| Ok(params.p0 + params.delta_p * model.tpr_at(t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(params.delta_p / (hi - lo) * trapezoid(&taus, &values))
}

#[derive(Debug, Clone)]
pub struct AlgorithmCandidate {
    pub name: String,
    pub model: JointScoreModel,
}

impl AlgorithmCandidate {
    pub fn new(name: impl Into<String>, model: JointScoreModel) -> Self {
        Self {
            name: name.into(),
            model,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateReport {
    pub name: String,
    pub auc: f64,
    pub opauc: f64,
    pub table: Vec<OpaucPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub candidates: Vec<CandidateReport>,
    pub winner_by_auc: String,
    pub winner_by_opauc: String,
}

/// AUC of a candidate: rank-based for labeled corpora, integral otherwise.
pub fn candidate_auc(model: &JointScoreModel) -> Result<f64> {
    match model.spec() {
        JointScoreSpec::EmpiricalLabeled(rows) => {
            auc_rank(&rows.iter().map(|r| (r.predicted, r.outcome)).collect::<Vec<_>>())
        }
        _ => auc_integral(model),
    }
}

/// Scores every candidate by AUC and OpAUC and names the winner under each.
pub fn select_algorithm(
    candidates: &[AlgorithmCandidate],
    mu: &CapacityDistribution,
    params: &BehavioralParams,
) -> Result<SelectionReport> {
    select_algorithm_with(candidates, mu, params, Execution::default())
}

pub fn select_algorithm_with(
    candidates: &[AlgorithmCandidate],
    mu: &CapacityDistribution,
    params: &BehavioralParams,
    exec: Execution,
) -> Result<SelectionReport> {
    if candidates.len() < 2 {
        return Err(invalid("candidates", "need at least two candidates"));
    }
    for (i, c) in candidates.iter().enumerate() {
        if candidates[..i].iter().any(|o| o.name == c.name) {
            return Err(invalid("candidates", format!("duplicate name `{}`", c.name)));
        }
    }
    let reports = map_indexed(exec, candidates.len(), |i| {
        let c = &candidates[i];
        let table = opauc_table(&c.model, mu, params)?;
        Ok(CandidateReport {
            name: c.name.clone(),
            auc: candidate_auc(&c.model)?,
            opauc: table.iter().map(|p| p.weight * p.integrand).sum(),
            table,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let winner = |key: fn(&CandidateReport) -> f64| {
        reports
            .iter()
            .reduce(|best, c| {
                let (a, b) = (key(c), key(best));
                if a > b || (a == b && c.name < best.name) {
                    c
                } else {
                    best
                }
            })
            .map(|c| c.name.clone())
            .expect("at least two candidates")
    };
    Ok(SelectionReport {
        winner_by_auc: winner(|c| c.auc),
        winner_by_opauc: winner(|c| c.opauc),
        candidates: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BehavioralParams {
        BehavioralParams::new(0.1, 0.5).unwrap()
    }

    #[test]
    fn rank_auc_examples() {
        assert!((auc_rank(&[(0.9, true), (0.8, false), (0.1, true)]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(auc_rank(&[(0.9, true), (0.8, true), (0.1, false)]).unwrap(), 1.0);
        assert_eq!(auc_rank(&[(0.5, true), (0.5, false)]).unwrap(), 0.5);
        assert!(matches!(auc_rank(&[(0.5, true)]), Err(Error::AucUndefined(_))));
    }

    #[test]
    fn uniform_auc_is_five_sixths() {
        let a = auc_integral(&JointScoreModel::uniform_perfect()).unwrap();
        assert!((a - 5.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn roc_endpoints_and_interior() {
        let roc = roc_curve(&JointScoreModel::uniform_perfect(), 11).unwrap();
        assert_eq!((roc[0].fpr, roc[0].tpr), (1.0, 1.0));
        assert_eq!((roc[10].fpr, roc[10].tpr), (0.0, 0.0));
        assert!((roc[8].tpr - 0.36).abs() < 1e-12);
        assert!((roc[8].fpr - 0.04).abs() < 1e-12);
    }

    #[test]
    fn single_atom_opauc() {
        let mu = CapacityDistribution::atoms([(0.2, 1.0)]).unwrap();
        let v = opauc(&JointScoreModel::uniform_perfect(), &mu, &params()).unwrap();
        let tau = (2.4 - 0.96f64.sqrt()) / 2.0;
        assert!((v - 0.2 * tau / 0.5).abs() < 1e-7);
    }

    #[test]
    fn closed_form_regime_check() {
        let m = JointScoreModel::uniform_perfect();
        assert!(matches!(
            opauc_uniform_closed_form(&m, 0.05, 0.15, &params()),
            Err(Error::RegimeViolated(_))
        ));
        let closed = opauc_uniform_closed_form(&m, 0.3, 0.5, &params()).unwrap();
        let mu = CapacityDistribution::UniformRatio { lo: 0.3, hi: 0.5 };
        let general = opauc(&m, &mu, &params()).unwrap();
        assert!((closed - general).abs() < 1e-3, "{closed} vs {general}");
    }

    #[test]
    fn capacity_law_validation() {
        assert!(CapacityDistribution::atoms([(0.2, 0.5)]).is_err());
        assert!(CapacityDistribution::atoms([(0.0, 1.0)]).is_err());
        assert!(CapacityDistribution::UniformRatio { lo: 0.3, hi: 0.3 }.validate().is_err());
        let w: f64 = CapacityDistribution::UniformRatio { lo: 0.1, hi: 0.3 }
            .nodes()
            .iter()
            .map(|n| n.1)
            .sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_candidates_tie_to_smallest_name() {
        let m = JointScoreModel::uniform_perfect();
        let cands = vec![AlgorithmCandidate::new("beta", m.clone()), AlgorithmCandidate::new("alpha", m)];
        let mu = CapacityDistribution::atoms([(0.2, 1.0)]).unwrap();
        let r = select_algorithm(&cands, &mu, &params()).unwrap();
        assert_eq!(r.winner_by_auc, "alpha");
        assert_eq!(r.winner_by_opauc, "alpha");
    }

    #[test]
    fn selection_rejects_bad_input() {
        let m = JointScoreModel::uniform_perfect();
        let mu = CapacityDistribution::atoms([(0.2, 1.0)]).unwrap();
        assert!(select_algorithm(&[AlgorithmCandidate::new("a", m.clone())], &mu, &params()).is_err());
        let dup = vec![AlgorithmCandidate::new("a", m.clone()), AlgorithmCandidate::new("a", m)];
        assert!(select_algorithm(&dup, &mu, &params()).is_err());
    }
}
