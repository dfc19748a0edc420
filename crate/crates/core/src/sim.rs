//! Finite-population simulation of the flag → request → allocate funnel, and
//! exact small-instance oracles for it.
//!
//! RNG contract: trial `t` draws from a ChaCha8 stream keyed by `(seed, t)`.
//! Within a trial the stream is consumed in a fixed order (cohort, tie keys,
//! request uniforms in individual-index order, allocation), and each
//! threshold on a grid replays the same allocation stream, so grid points
//! share common random numbers. Trials are reduced in fixed chunks, making
//! every estimate independent of the worker count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_binomial;

use crate::error::{invalid, Error, Result};
use crate::numeric::{linspace, tolerant_floor};
use crate::par::{map_chunks, Execution, Moments};
use crate::planner::{fluid_grid_argmax, BehavioralParams, ThresholdPolicy, DEFAULT_GRID};
use crate::quad::CompositeRule;
use crate::score_model::{flagged_count, Individual, JointScoreModel, Population, PopulationSampler};

/// Largest population the exact oracles accept.
pub const EXACT_BUDGET: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    pub params: BehavioralParams,
    /// Share of capacity reserved for the highest-scored requesters.
    pub beta1: f64,
    pub trials: usize,
    pub seed: u64,
    /// Score served individuals by their realized outcome instead of `r`.
    pub binary_mode: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n == 0 {
            return Err(invalid("n", "population size must be at least 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.beta1) {
            return Err(invalid("beta1", format!("{} is outside [0, 1]", self.beta1)));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// What happened in one simulated cohort.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialOutcome {
    pub served_value: f64,
    pub served_count: usize,
    pub served_flagged: usize,
    pub served_unflagged: usize,
    pub requests_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub mean_served: f64,
    pub mean_served_flagged: f64,
    pub mean_served_unflagged: f64,
    pub mean_requests: f64,
    /// Mean served divided by capacity; zero when there is no capacity.
    pub utilization: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    value: Moments,
    served: u64,
    served_flagged: u64,
    requests: u64,
}

impl Accumulator {
    fn push(&mut self, t: &TrialOutcome) {
        self.value.push(t.served_value);
        self.served += t.served_count as u64;
        self.served_flagged += t.served_flagged as u64;
        self.requests += t.requests_total as u64;
    }

    fn merge(&mut self, other: &Accumulator) {
        self.value.merge(&other.value);
        self.served += other.served;
        self.served_flagged += other.served_flagged;
        self.requests += other.requests;
    }

    fn estimate(&self, m: usize) -> SimEstimate {
        let t = self.value.count as f64;
        let mean_served = self.served as f64 / t;
        let mean_served_flagged = self.served_flagged as f64 / t;
        SimEstimate {
            mean: self.value.mean,
            std_error: self.value.std_error(),
            trials: self.value.count as usize,
            mean_served,
            mean_served_flagged,
            mean_served_unflagged: (self.served - self.served_flagged) as f64 / t,
            mean_requests: self.requests as f64 / t,
            utilization: if m == 0 { 0.0 } else { mean_served / m as f64 },
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn value_of(ind: &Individual, binary_mode: bool) -> f64 {
    match (binary_mode, ind.outcome) {
        (true, Some(y)) => f64::from(u8::from(y)),
        _ => ind.true_score,
    }
}

/// Indices ordered by decreasing predicted score, ties by ascending key.
fn rank_by_score(individuals: &[Individual], keys: &[u64], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..individuals.len());
    order.sort_unstable_by(|&a, &b| {
        individuals[b]
            .predicted
            .total_cmp(&individuals[a].predicted)
            .then(keys[a].cmp(&keys[b]))
    });
}

fn draw_keys<R: Rng + ?Sized>(rng: &mut R, n: usize, keys: &mut Vec<u64>) {
    keys.clear();
    keys.extend((0..n).map(|_| rng.random::<u64>()));
}

/// Flags the `n - ⌈τn⌉` highest predicted scores; ties are broken by a
/// permutation drawn from `seed`.
pub fn flag_top(population: &Population, tau: f64, seed: u64) -> Result<Vec<bool>> {
    if population.is_empty() {
        return Err(invalid("population", "must be nonempty"));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid("tau", format!("{tau} is outside [0, 1]")));
    }
    let order = frozen_order(population, seed);
    let k = flagged_count(population.len(), tau);
    let mut flags = vec![false; population.len()];
    for &i in &order[..k] {
        flags[i] = true;
    }
    Ok(flags)
}

fn frozen_order(population: &Population, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys = Vec::new();
    draw_keys(&mut rng, population.len(), &mut keys);
    let mut order = Vec::new();
    rank_by_score(&population.individuals, &keys, &mut order);
    order
}

/// Two-stage allocation over requesters already listed in priority order:
/// the first `⌊β₁m⌋` are served, then `m - ⌊β₁m⌋` of the rest at random.
/// Returns the (prioritized, randomly chosen) served slices.
fn allocate_ranked<'a, T, R: Rng + ?Sized>(
    requesters: &'a mut [T],
    m: usize,
    beta1: f64,
    rng: &mut R,
) -> (&'a [T], &'a [T]) {
    let reserved = (tolerant_floor(beta1 * m as f64) as usize).min(m);
    let top = reserved.min(requesters.len());
    let (head, rest) = requesters.split_at_mut(top);
    let take = (m - reserved).min(rest.len());
    if take == rest.len() {
        return (head, rest);
    }
    let (chosen, _) = rest.partial_shuffle(rng, take);
    (head, chosen)
}

/// Serves up to `m` of `requesters` (pairs of id and predicted score): the
/// `⌊β₁m⌋` highest-scored first, ties broken at random, then the remaining
/// slots uniformly at random among those not yet served.
pub fn allocate_mixture<R: Rng + ?Sized>(
    requesters: &[(usize, f64)],
    m: usize,
    beta1: f64,
    rng: &mut R,
) -> Vec<usize> {
    let mut ranked = requesters.to_vec();
    ranked.shuffle(rng);
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (head, chosen) = allocate_ranked(&mut ranked, m, beta1, rng);
    head.iter().chain(chosen).map(|r| r.0).collect()
}

#[derive(Clone, Copy)]
struct Requester {
    index: usize,
    flagged: bool,
}

/// Per-worker buffers reused across trials.
#[derive(Default)]
struct Scratch {
    individuals: Vec<Individual>,
    keys: Vec<u64>,
    order: Vec<usize>,
    uniforms: Vec<f64>,
    requesters: Vec<Requester>,
}

/// Runs request and allocation for one cohort at each threshold in `taus`.
#[allow(clippy::too_many_arguments)]
fn funnel<F: FnMut(usize, TrialOutcome)>(
    config: &SimConfig,
    individuals: &[Individual],
    order: &[usize],
    uniforms: &[f64],
    allocation_rng: &ChaCha8Rng,
    taus: &[f64],
    requesters: &mut Vec<Requester>,
    mut emit: F,
) {
    let n = individuals.len();
    let p_flagged = config.params.flagged_rate();
    let p_base = config.params.p0;
    for (j, &tau) in taus.iter().enumerate() {
        let k = flagged_count(n, tau);
        requesters.clear();
        for (pos, &index) in order.iter().enumerate() {
            let flagged = pos < k;
            let p = if flagged { p_flagged } else { p_base };
            if uniforms[index] < p {
                requesters.push(Requester { index, flagged });
            }
        }
        let requests_total = requesters.len();
        let mut rng = allocation_rng.clone();
        let (head, chosen) = allocate_ranked(requesters, config.m, config.beta1, &mut rng);
        let mut out = TrialOutcome {
            requests_total,
            ..TrialOutcome::default()
        };
        for r in head.iter().chain(chosen) {
            out.served_value += value_of(&individuals[r.index], config.binary_mode);
            out.served_count += 1;
            if r.flagged {
                out.served_flagged += 1;
            } else {
                out.served_unflagged += 1;
            }
        }
        emit(j, out);
    }
}

fn draw_uniforms<R: Rng + ?Sized>(rng: &mut R, n: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..n).map(|_| rng.random::<f64>()));
}

/// Monte Carlo estimates at every threshold in `taus`, resampling a cohort
/// from `model` in each trial and sharing random numbers across thresholds.
pub fn simulate_thresholds(config: &SimConfig, model: &JointScoreModel, taus: &[f64]) -> Result<Vec<SimEstimate>> {
    simulate_thresholds_with(config, model, taus, Execution::default())
}

pub fn simulate_thresholds_with(
    config: &SimConfig,
    model: &JointScoreModel,
    taus: &[f64],
    exec: Execution,
) -> Result<Vec<SimEstimate>> {
    config.validate()?;
    check_taus(taus)?;
    let sampler = model.sampler();
    let n = config.n;
    let run = |start: usize, end: usize| {
        let mut acc = vec![Accumulator::default(); taus.len()];
        let mut s = Scratch::default();
        for trial in start..end {
            let mut rng = trial_rng(config.seed, trial);
            sample_into(&sampler, &mut rng, n, config.binary_mode, &mut s.individuals);
            draw_keys(&mut rng, n, &mut s.keys);
            rank_by_score(&s.individuals, &s.keys, &mut s.order);
            draw_uniforms(&mut rng, n, &mut s.uniforms);
            funnel(config, &s.individuals, &s.order, &s.uniforms, &rng, taus, &mut s.requesters, |j, out| {
                acc[j].push(&out)
            });
        }
        acc
    };
    Ok(reduce(map_chunks(exec, config.trials, run), taus.len(), config.m))
}

fn sample_into(sampler: &PopulationSampler, rng: &mut ChaCha8Rng, n: usize, binary: bool, out: &mut Vec<Individual>) {
    sampler.fill(rng, n, binary, out);
}

fn reduce(chunks: Vec<Vec<Accumulator>>, width: usize, m: usize) -> Vec<SimEstimate> {
    let mut total = vec![Accumulator::default(); width];
    for chunk in &chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    total.iter().map(|a| a.estimate(m)).collect()
}

fn check_taus(taus: &[f64]) -> Result<()> {
    for &t in taus {
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid("tau", format!("{t} is outside [0, 1]")));
        }
    }
    Ok(())
}

/// Monte Carlo estimate of system efficacy under `policy`, resampling the
/// cohort in every trial. Policies are resolved at `rho = m / n`.
pub fn simulate_policy(config: &SimConfig, policy: ThresholdPolicy, model: &JointScoreModel) -> Result<SimEstimate> {
    simulate_policy_with(config, policy, model, Execution::default())
}

pub fn simulate_policy_with(
    config: &SimConfig,
    policy: ThresholdPolicy,
    model: &JointScoreModel,
    exec: Execution,
) -> Result<SimEstimate> {
    config.validate()?;
    let tau = policy.resolve(config.rho(), model, &config.params)?;
    Ok(simulate_thresholds_with(config, model, &[tau], exec)?[0])
}

/// Monte Carlo estimate for a fixed population; the flagged set is fixed
/// once from `config.seed` and only requests and allocation are redrawn.
pub fn simulate_frozen(config: &SimConfig, population: &Population, tau: f64) -> Result<SimEstimate> {
    simulate_frozen_with(config, population, &[tau], Execution::default()).map(|v| v[0])
}

pub fn simulate_frozen_with(
    config: &SimConfig,
    population: &Population,
    taus: &[f64],
    exec: Execution,
) -> Result<Vec<SimEstimate>> {
    config.validate()?;
    check_taus(taus)?;
    if population.len() != config.n {
        return Err(invalid("n", format!("config has {} but population has {}", config.n, population.len())));
    }
    let order = frozen_order(population, config.seed);
    let run = |start: usize, end: usize| {
        let mut acc = vec![Accumulator::default(); taus.len()];
        let mut uniforms = Vec::new();
        let mut requesters = Vec::new();
        for trial in start..end {
            let mut rng = trial_rng(config.seed, trial);
            draw_uniforms(&mut rng, config.n, &mut uniforms);
            funnel(config, &population.individuals, &order, &uniforms, &rng, taus, &mut requesters, |j, out| {
                acc[j].push(&out)
            });
        }
        acc
    };
    Ok(reduce(map_chunks(exec, config.trials, run), taus.len(), config.m))
}

/// Result of a simulated grid search over thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOracle {
    pub tau_best: f64,
    pub best: SimEstimate,
    pub curve: Vec<(f64, SimEstimate)>,
}

/// Simulated argmax over an evenly spaced `τ`-grid; ties go to the smallest `τ`.
pub fn grid_oracle(config: &SimConfig, model: &JointScoreModel, grid_size: usize) -> Result<GridOracle> {
    grid_oracle_with(config, model, grid_size, Execution::default())
}

pub fn grid_oracle_with(
    config: &SimConfig,
    model: &JointScoreModel,
    grid_size: usize,
    exec: Execution,
) -> Result<GridOracle> {
    if grid_size < 2 {
        return Err(invalid("grid_size", "must be at least 2"));
    }
    let taus = linspace(0.0, 1.0, grid_size);
    let estimates = simulate_thresholds_with(config, model, &taus, exec)?;
    let mut best = 0;
    for (j, e) in estimates.iter().enumerate() {
        if e.mean > estimates[best].mean {
            best = j;
        }
    }
    Ok(GridOracle {
        tau_best: taus[best],
        best: estimates[best],
        curve: taus.into_iter().zip(estimates).collect(),
    })
}

/// Threshold a fluid grid search would pick, for callers comparing against
/// [`grid_oracle`].
pub fn fluid_grid_threshold(config: &SimConfig, model: &JointScoreModel) -> f64 {
    fluid_grid_argmax(DEFAULT_GRID, config.n as f64, config.rho(), model, &config.params)
}

/// `P(Binomial(n, p) = k)` for `k = 0..=n`.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (0..=n)
        .map(|k| (ln_binomial(n as u64, k as u64) + k as f64 * lp + (n - k) as f64 * lq).exp())
        .collect()
}

/// Probability mass function of the sum of two independent variables.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Law of the request count `Binomial(k, p₀+ΔP) + Binomial(n-k, p₀)`.
fn request_count_pmf(flagged: usize, unflagged: usize, params: &BehavioralParams) -> Vec<f64> {
    convolve(
        &binomial_pmf(flagged, params.flagged_rate()),
        &binomial_pmf(unflagged, params.p0),
    )
}

fn check_budget(n: usize) -> Result<()> {
    if n > EXACT_BUDGET {
        Err(Error::OverBudget { n, budget: EXACT_BUDGET })
    } else {
        Ok(())
    }
}

/// Exact `E[min(S, m)]` for the request count `S` at threshold `τ`.
pub fn exact_expected_served(tau: f64, n: usize, m: usize, params: &BehavioralParams) -> Result<f64> {
    check_budget(n)?;
    params.validate()?;
    check_taus(&[tau])?;
    let k = flagged_count(n, tau);
    let pmf = request_count_pmf(k, n - k, params);
    Ok(pmf.iter().enumerate().map(|(s, &p)| p * s.min(m) as f64).sum())
}

/// `E[min(m / (1 + S), 1)]`: the chance that one given requester is served
/// when `S` others also request.
fn service_probability(others: &[f64], m: usize) -> f64 {
    let m = m as f64;
    others
        .iter()
        .enumerate()
        .map(|(s, &p)| p * (m / (1.0 + s as f64)).min(1.0))
        .sum()
}

/// Per-requester service probabilities `(flagged, unflagged)` under random
/// allocation with `k` of `n` flagged.
fn group_service_probabilities(n: usize, k: usize, m: usize, params: &BehavioralParams) -> (f64, f64) {
    let flagged = if k > 0 {
        service_probability(&request_count_pmf(k - 1, n - k, params), m)
    } else {
        0.0
    };
    let unflagged = if k < n {
        service_probability(&request_count_pmf(k, n - k - 1, params), m)
    } else {
        0.0
    };
    (flagged, unflagged)
}

/// Exact efficacy of random allocation on a fixed population. The flagged
/// set is the one [`flag_top`] picks with the same `seed`.
pub fn exact_objective_random(
    population: &Population,
    tau: f64,
    m: usize,
    params: &BehavioralParams,
    seed: u64,
) -> Result<f64> {
    let n = population.len();
    check_budget(n)?;
    params.validate()?;
    let flags = flag_top(population, tau, seed)?;
    let k = flags.iter().filter(|&&f| f).count();
    let (g_flagged, g_unflagged) = group_service_probabilities(n, k, m, params);
    let (mut flagged_sum, mut unflagged_sum) = (0.0, 0.0);
    for (ind, &f) in population.individuals.iter().zip(&flags) {
        if f {
            flagged_sum += ind.true_score;
        } else {
            unflagged_sum += ind.true_score;
        }
    }
    Ok(g_flagged * params.flagged_rate() * flagged_sum + g_unflagged * params.p0 * unflagged_sum)
}

/// Exact efficacy of random allocation averaged over i.i.d. cohorts of size `n`.
///
/// Uses `E[Σ top-k r] = n ∫ L(u) Beta(u; n-k, k) du`, with `L` the flagged mass.
pub fn exact_objective_expected(
    model: &JointScoreModel,
    tau: f64,
    n: usize,
    m: usize,
    params: &BehavioralParams,
) -> Result<f64> {
    check_budget(n)?;
    params.validate()?;
    check_taus(&[tau])?;
    if n == 0 {
        return Err(invalid("n", "population size must be at least 1"));
    }
    let k = flagged_count(n, tau);
    let total = n as f64 * model.mean_true_score();
    let top = expected_top_sum(model, n, k);
    let (g_flagged, g_unflagged) = group_service_probabilities(n, k, m, params);
    Ok(g_flagged * params.flagged_rate() * top + g_unflagged * params.p0 * (total - top))
}

/// `E[sum of r over the k highest predicted scores among n]`.
pub fn expected_top_sum(model: &JointScoreModel, n: usize, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k >= n {
        return n as f64 * model.mean_true_score();
    }
    let (a, b) = ((n - k) as f64, k as f64);
    let mean = a / (a + b);
    let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
    let lo = (mean - 40.0 * sd).max(0.0);
    let hi = (mean + 40.0 * sd).min(1.0);
    let norm = ln_beta(a, b);
    let rule = CompositeRule::new(lo, hi, 128, 8);
    let integral = rule.integrate(|u| {
        let density = ((a - 1.0) * u.ln() + (b - 1.0) * (-u).ln_1p() - norm).exp();
        density * model.flagged_mass_unchecked(u)
    });
    n as f64 * integral
}

/// Chernoff bound on `|fluid_served - exact_expected_served|` at `τ`, with
/// the request rate taken as `p₀ + ΔP(1-τ)` for every individual.
pub fn chernoff_demand_bound(tau: f64, n: usize, m: usize, params: &BehavioralParams) -> f64 {
    let mean = n as f64 * params.demand_rate(tau);
    let m = m as f64;
    if mean <= 0.0 {
        return 0.0;
    }
    if mean >= m {
        let delta = (mean - m) / mean;
        m * (-delta * delta / 2.0 * mean).exp()
    } else {
        let delta = (m - mean) / mean;
        n as f64 * (-delta * delta / (2.0 + delta) * mean).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_population() -> Population {
        Population::from_scores(&[1.0, 0.0], &[1.0, 0.0])
    }

    #[test]
    fn flag_counts() {
        let pop = Population::from_scores(&vec![0.5; 100], &(0..100).map(|i| i as f64 / 100.0).collect::<Vec<_>>());
        let f = flag_top(&pop, 0.8, 1).unwrap();
        assert_eq!(f.iter().filter(|&&x| x).count(), 20);
        assert!(f[80..].iter().all(|&x| x));
        assert_eq!(flag_top(&pop, 1.0, 1).unwrap().iter().filter(|&&x| x).count(), 0);
        assert_eq!(flag_top(&pop, 0.0, 1).unwrap().iter().filter(|&&x| x).count(), 100);
    }

    #[test]
    fn tied_scores_flag_seeded_sets() {
        let pop = Population::from_scores(&[0.5; 11], &[0.5; 11]);
        let a = flag_top(&pop, 0.5, 1).unwrap();
        let b = flag_top(&pop, 0.5, 2).unwrap();
        assert_eq!(a.iter().filter(|&&x| x).count(), 5);
        assert_eq!(b.iter().filter(|&&x| x).count(), 5);
        assert_ne!(a, b);
        assert_eq!(a, flag_top(&pop, 0.5, 1).unwrap());
    }

    #[test]
    fn mixture_floor_arithmetic() {
        let reqs: Vec<(usize, f64)> = (0..10).map(|i| (i, i as f64 / 10.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let served = allocate_mixture(&reqs, 5, 0.5, &mut rng);
        assert_eq!(served.len(), 5);
        assert_eq!(&served[..2], &[9, 8]);
        assert!(served[2..].iter().all(|&i| i < 8));
    }

    #[test]
    fn full_priority_with_slack_serves_everyone() {
        let reqs: Vec<(usize, f64)> = (0..7).map(|i| (i, 0.3)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut served = allocate_mixture(&reqs, 10, 1.0, &mut rng);
        served.sort();
        assert_eq!(served, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn random_allocation_is_uniform() {
        let reqs: Vec<(usize, f64)> = (0..30).map(|i| (i, i as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = [0u32; 30];
        let reps = 30_000;
        for _ in 0..reps {
            for i in allocate_mixture(&reqs, 20, 0.0, &mut rng) {
                hits[i] += 1;
            }
        }
        // Binomial sd of the per-requester rate is about 0.0027.
        for h in hits {
            assert!((h as f64 / reps as f64 - 2.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        for (n, p) in [(0, 0.3), (10, 0.0), (10, 1.0), (200, 0.37)] {
            let s: f64 = binomial_pmf(n, p).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_served_examples() {
        let half = BehavioralParams::new(0.5, 0.0).unwrap();
        assert!((exact_expected_served(1.0, 2, 1, &half).unwrap() - 0.75).abs() < 1e-15);
        let p = BehavioralParams::new(0.1, 0.5).unwrap();
        let k = flagged_count(50, 0.3) as f64;
        let mean = k * 0.6 + (50.0 - k) * 0.1;
        assert!((exact_expected_served(0.3, 50, 50, &p).unwrap() - mean).abs() < 1e-10);
        assert!(matches!(exact_expected_served(0.3, 6000, 50, &p), Err(Error::OverBudget { .. })));
    }

    #[test]
    fn exact_objective_examples() {
        let single = Population::from_scores(&[0.7], &[0.7]);
        let p = BehavioralParams::new(0.3, 0.5).unwrap();
        assert!((exact_objective_random(&single, 1.0, 1, &p, 0).unwrap() - 0.21).abs() < 1e-15);
        let half = BehavioralParams::new(0.5, 0.0).unwrap();
        assert!((exact_objective_random(&pair_population(), 1.0, 1, &half, 0).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn frozen_simulation_deterministic_funnel() {
        let pop = Population::from_scores(&[0.2, 0.4, 0.9], &[0.2, 0.4, 0.9]);
        let cfg = SimConfig {
            n: 3,
            m: 3,
            params: BehavioralParams::new(0.0, 1.0).unwrap(),
            beta1: 0.0,
            trials: 10,
            seed: 1,
            binary_mode: false,
        };
        let e = simulate_frozen(&cfg, &pop, 0.0).unwrap();
        assert!((e.mean - 1.5).abs() < 1e-12);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.mean_served, 3.0);
        assert_eq!(e.utilization, 1.0);
    }

    #[test]
    fn zero_capacity_grid() {
        let cfg = SimConfig {
            n: 20,
            m: 0,
            params: BehavioralParams::new(0.1, 0.5).unwrap(),
            beta1: 0.0,
            trials: 50,
            seed: 1,
            binary_mode: false,
        };
        let g = grid_oracle(&cfg, &JointScoreModel::uniform_perfect(), 11).unwrap();
        assert_eq!(g.tau_best, 0.0);
        assert!(g.curve.iter().all(|(_, e)| e.mean == 0.0));
    }

    #[test]
    fn expected_top_sum_uniform() {
        // Uniform order statistics: E[U_(j)] = j / (n + 1).
        let m = JointScoreModel::uniform_perfect();
        let (n, k) = (40, 7);
        let oracle: f64 = (n - k + 1..=n).map(|j| j as f64 / (n + 1) as f64).sum();
        assert!((expected_top_sum(&m, n, k) - oracle).abs() < 1e-10);
    }

    #[test]
    fn chernoff_bound_is_trivial_at_the_boundary() {
        let p = BehavioralParams::new(0.1, 0.5).unwrap();
        assert!((chernoff_demand_bound(0.8, 100, 20, &p) - 20.0).abs() < 1e-9);
        assert!(chernoff_demand_bound(0.2, 1000, 200, &p) < 1e-10);
    }
}
