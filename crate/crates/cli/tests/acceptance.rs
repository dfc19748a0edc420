//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use capflag::metrics::{
    auc_integral, auc_rank, opauc, opauc_uniform_closed_form, select_algorithm, AlgorithmCandidate,
    CapacityDistribution,
};
use capflag::planner::{
    capacity_matching_threshold, critical_baseline, fluid_efficacy, fluid_grid_argmax, fluid_objective,
    fluid_served, gap_curve, max_relative_gap_capacity_matching, score_optimal_threshold, two_point_threshold,
    BehavioralParams, SweepAxis, SweepBase, ThresholdPolicy,
};
use capflag::score_model::{
    sample_population, BetaComponent, JointScoreModel, Predictor, TrueScoreDistribution,
};
use capflag::sim::{
    exact_objective_expected, exact_objective_random, grid_oracle, simulate_frozen, simulate_policy,
    simulate_thresholds, SimConfig,
};

type Outcome = Result<String, String>;

fn mixture() -> TrueScoreDistribution {
    TrueScoreDistribution::beta_mixture(vec![
        BetaComponent::new(0.7, 2.0, 10.0),
        BetaComponent::new(0.3, 8.0, 2.0),
    ])
    .unwrap()
}

fn mixture_perfect() -> JointScoreModel {
    JointScoreModel::analytic(mixture(), Predictor::Perfect).unwrap()
}

fn params(p0: f64, delta_p: f64) -> BehavioralParams {
    BehavioralParams::new(p0, delta_p).unwrap()
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn two_point_optimality() -> Outcome {
    let start = Instant::now();
    let models = [("uniform", JointScoreModel::uniform_perfect()), ("mixture", mixture_perfect())];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for _ in 0..30 {
        let p0 = rng.random_range(0.0..0.6);
        let delta_p = rng.random_range(0.05..(1.0 - p0));
        let rho = rng.random_range(0.01..0.9);
        let p = params(p0, delta_p);
        for (_, model) in &models {
            let planned = two_point_threshold(rho, model, &p).map_err(|e| e.to_string())?;
            let grid = fluid_grid_argmax(2001, 1.0, rho, model, &p);
            worst = worst.max((planned - grid).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-3 && secs < 60.0,
        format!("max |two_point - grid argmax| = {worst:.2e} over 60 cases (tol 1e-3), {secs:.1} s"),
    )
}

fn closed_form_anchors() -> Outcome {
    let p = params(0.1, 0.5);
    let uniform = JointScoreModel::uniform_perfect();
    let tau_c = capacity_matching_threshold(0.2, &p);
    // (1-τ)² = 0.4τ - 0.2
    let tau_oracle = 1.2 - 0.24_f64.sqrt();
    let tau = score_optimal_threshold(&uniform, &p).map_err(|e| e.to_string())?;
    // 2p² + p - 0.08 = 0
    let p_oracle = (-1.0 + 1.64_f64.sqrt()) / 4.0;
    let p_bar = critical_baseline(0.2, &uniform, 0.5).map_err(|e| e.to_string())?;
    let gap = max_relative_gap_capacity_matching(&uniform, &p).map_err(|e| e.to_string())?;
    let ok = tau_c == 0.8
        && (tau - 0.710102).abs() <= 1e-5
        && (tau - tau_oracle).abs() <= 1e-5
        && (p_bar - 0.070156).abs() <= 1e-4
        && (p_bar - p_oracle).abs() <= 1e-4
        && (gap - 0.29593).abs() <= 1e-4;
    verdict(
        ok,
        format!("tau_c = {tau_c}, tau_score = {tau:.7} (oracle {tau_oracle:.7}), critical p0 = {p_bar:.6} (oracle {p_oracle:.6}), max gap = {gap:.6}"),
    )
}

fn motivating_example() -> Outcome {
    let p = params(0.1, 0.5);
    let uniform = JointScoreModel::uniform_perfect();
    let taus = [0.9, 0.8, 0.7, 0.6];
    let served: Vec<f64> = taus.iter().map(|&t| fluid_served(t, 100.0, 20.0, &p)).collect();
    let demand: Vec<f64> = taus.iter().map(|&t| 100.0 * p.demand_rate(t)).collect();
    let efficacy = fluid_efficacy(0.8, &uniform, &p).map_err(|e| e.to_string())?;
    // 0.8 and 0.7 are not binary fractions, so "exact" means agreement to a few ulps.
    let ulps = |x: f64, y: f64| (x - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0);
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(&x, &y)| ulps(x, y));
    let ok = close(&served, &[15.0, 20.0, 20.0, 20.0]) && close(&demand, &[15.0, 20.0, 25.0, 30.0]) && ulps(efficacy, 0.7);
    verdict(ok, format!("served {served:?}, demand {demand:?}, efficacy(0.8) = {efficacy:?}"))
}

fn fluid_bound_and_convergence() -> Outcome {
    let start = Instant::now();
    let p = params(0.1, 0.5);
    let rho = 0.2;
    let models = [("uniform", JointScoreModel::uniform_perfect()), ("mixture", mixture_perfect())];
    let taus: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_sampled_z = f64::NEG_INFINITY;
    for (_, model) in &models {
        for n in [100usize, 1000] {
            let m = (rho * n as f64).round() as usize;
            let pops: Vec<_> = (0..50)
                .map(|s| sample_population(model, n, false, 100 + s).unwrap())
                .collect();
            for &tau in &taus {
                let fluid = fluid_objective(tau, model, n as f64, m as f64, &p).map_err(|e| e.to_string())?;
                let exact = exact_objective_expected(model, tau, n, m, &p).map_err(|e| e.to_string())?;
                worst_excess = worst_excess.max(exact - fluid);
                // Average over sampled cohorts: bounded up to its own sampling error.
                let values: Vec<f64> = pops
                    .iter()
                    .map(|pop| exact_objective_random(pop, tau, m, &p, 1).unwrap())
                    .collect();
                let mean = values.iter().sum::<f64>() / 50.0;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 49.0;
                let se = (var / 50.0).sqrt();
                if se > 0.0 {
                    worst_sampled_z = worst_sampled_z.max((mean - fluid) / se);
                } else if mean > fluid + 1e-9 {
                    worst_sampled_z = f64::INFINITY;
                }
            }
        }
    }
    let uniform = &models[0].1;
    let tau = two_point_threshold(rho, uniform, &p).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for n in [100usize, 400, 1600] {
        let m = (rho * n as f64).round() as usize;
        let fluid = fluid_objective(tau, uniform, n as f64, m as f64, &p).map_err(|e| e.to_string())?;
        let exact = exact_objective_expected(uniform, tau, n, m, &p).map_err(|e| e.to_string())?;
        errors.push((fluid - exact).abs() / fluid);
    }
    let shrinking = errors.windows(2).all(|w| w[1] < w[0]);
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_excess <= 1e-9 && worst_sampled_z <= 3.0 && shrinking && errors[2] < 0.01 && secs < 120.0;
    verdict(
        ok,
        format!(
            "max (exact - fluid) = {worst_excess:.2e} (tol 1e-9), 50-cohort average max z = {worst_sampled_z:.2}, rel error n=100/400/1600: {:.2e}/{:.2e}/{:.2e}, {secs:.1} s",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn mc_matches_exact() -> Outcome {
    let cases: [(usize, usize, f64, f64, f64, bool); 5] = [
        (50, 10, 0.8, 0.1, 0.5, false),
        (120, 30, 0.7, 0.2, 0.4, true),
        (200, 20, 0.71, 0.1, 0.5, false),
        (350, 100, 0.5, 0.05, 0.6, true),
        (500, 80, 0.9, 0.3, 0.3, false),
    ];
    let mut worst = 0.0_f64;
    for (i, &(n, m, tau, p0, delta_p, use_mixture)) in cases.iter().enumerate() {
        let model = if use_mixture { mixture_perfect() } else { JointScoreModel::uniform_perfect() };
        let population = sample_population(&model, n, false, 40 + i as u64).unwrap();
        let config = SimConfig {
            n,
            m,
            params: params(p0, delta_p),
            beta1: 0.0,
            trials: 100_000,
            seed: 900 + i as u64,
            binary_mode: false,
        };
        let est = simulate_frozen(&config, &population, tau).map_err(|e| e.to_string())?;
        let exact = exact_objective_random(&population, tau, m, &config.params, config.seed).map_err(|e| e.to_string())?;
        worst = worst.max((est.mean - exact).abs() / est.std_error);
    }
    verdict(worst <= 4.0, format!("max |MC - exact| = {worst:.2} standard errors over 5 frozen cohorts (tol 4)"))
}

fn suboptimality_curves() -> Outcome {
    let model = mixture_perfect();
    let p = params(0.1, 0.5);
    let tau_score = score_optimal_threshold(&model, &p).map_err(|e| e.to_string())?;
    let base = SweepBase { n: 1000.0, rho: 0.2, params: p };
    let rhos: Vec<f64> = (0..=550).map(|i| 0.05 + i as f64 * 0.001).collect();

    let fixed = gap_curve(ThresholdPolicy::Fixed(0.8), SweepAxis::Rho, &rhos, &model, &base).map_err(|e| e.to_string())?;
    let fixed_max = fixed.iter().fold(0.0_f64, |a, g| a.max(g.relative_gap));

    let boundary = p.p0 + p.delta_p * (1.0 - tau_score);
    let cm = gap_curve(ThresholdPolicy::CapacityMatching, SweepAxis::Rho, &rhos, &model, &base).map_err(|e| e.to_string())?;
    let above_zero = cm.iter().filter(|g| g.x >= boundary).all(|g| g.gap.abs() <= 1e-9);
    let below_positive = cm.iter().any(|g| g.x < boundary && g.gap > 1e-9);

    let p_bar = critical_baseline(0.2, &model, 0.5).map_err(|e| e.to_string())?;
    let p0s: Vec<f64> = (0..=100).map(|i| i as f64 * 0.002).collect();
    let sweep = gap_curve(ThresholdPolicy::CapacityMatching, SweepAxis::P0, &p0s, &model, &base).map_err(|e| e.to_string())?;
    let zero_below = sweep.iter().filter(|g| g.x <= p_bar).all(|g| g.gap.abs() <= 1e-9);
    let inside: Vec<f64> = sweep.iter().filter(|g| g.x > p_bar && g.x < 0.2).map(|g| g.gap).collect();
    let increasing = inside.len() >= 2 && inside.windows(2).all(|w| w[1] > w[0] - 1e-9) && inside[0] > 0.0;

    verdict(
        fixed_max > 0.30 && above_zero && below_positive && zero_below && increasing,
        format!(
            "fixed(0.8) max rel gap = {fixed_max:.3}; capacity matching zero above rho = {boundary:.4}: {above_zero}, positive below: {below_positive}; p0 sweep zero up to {p_bar:.4}: {zero_below}, increasing on {} points: {increasing}",
            inside.len()
        ),
    )
}

fn auc_identities() -> Outcome {
    let uniform = JointScoreModel::uniform_perfect();
    let integral = auc_integral(&uniform).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for (i, sigma) in [0.0, 0.1].into_iter().enumerate() {
        let model = JointScoreModel::analytic(
            TrueScoreDistribution::Uniform01,
            if sigma == 0.0 { Predictor::Perfect } else { Predictor::GaussianNoiseClipped { sigma } },
        )
        .unwrap();
        let pop = sample_population(&model, 10_000, true, 70 + i as u64).unwrap();
        let labeled: Vec<(f64, bool)> = pop
            .individuals
            .iter()
            .map(|x| (x.predicted, x.outcome.expect("binary draw")))
            .collect();
        let rank = auc_rank(&labeled).map_err(|e| e.to_string())?;
        let model_auc = auc_integral(&model).map_err(|e| e.to_string())?;
        worst = worst.max((rank - model_auc).abs());
    }
    verdict(
        (integral - 5.0 / 6.0).abs() <= 1e-3 && worst <= 0.01,
        format!("uniform AUC = {integral:.6} (5/6 +- 1e-3); max |rank - integral| = {worst:.4} (tol 0.01)"),
    )
}

/// Two candidates over one corpus whose ROC curves cross: "sharp" ranks the
/// top decile perfectly and the rest at random; "smooth" adds moderate noise
/// everywhere.
fn crossing_pair() -> (JointScoreModel, JointScoreModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
    let sharp = JointScoreModel::empirical_joint(
        truth
            .iter()
            .map(|&r| (if r >= 0.9 { r } else { 0.9 * rng.random::<f64>() }, r))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let smooth = JointScoreModel::empirical_joint(
        truth
            .iter()
            .map(|&r| {
                let z: f64 = rng.sample(StandardNormal);
                ((r + 0.2 * z).clamp(0.0, 1.0), r)
            })
            .collect::<Vec<_>>(),
    )
    .unwrap();
    (sharp, smooth)
}

fn opauc_soundness() -> Outcome {
    let p = params(0.1, 0.5);
    let uniform = JointScoreModel::uniform_perfect();
    let mu = CapacityDistribution::UniformRatio { lo: 0.3, hi: 0.5 };
    let general = opauc(&uniform, &mu, &p).map_err(|e| e.to_string())?;
    let closed = opauc_uniform_closed_form(&uniform, 0.3, 0.5, &p).map_err(|e| e.to_string())?;

    let (sharp, smooth) = crossing_pair();
    let p = params(0.02, 0.5);
    let scarce = CapacityDistribution::atoms([(0.05, 1.0)]).unwrap();
    let report = select_algorithm(
        &[AlgorithmCandidate::new("sharp", sharp.clone()), AlgorithmCandidate::new("smooth", smooth.clone())],
        &scarce,
        &p,
    )
    .map_err(|e| e.to_string())?;
    let config = SimConfig {
        n: 1000,
        m: 50,
        params: p,
        beta1: 0.0,
        trials: 10_000,
        seed: 3,
        binary_mode: true,
    };
    let sim = |model: &JointScoreModel| simulate_policy(&config, ThresholdPolicy::TwoPointOptimal, model);
    let (a, b) = (sim(&sharp).map_err(|e| e.to_string())?, sim(&smooth).map_err(|e| e.to_string())?);
    let (win, lose) = if report.winner_by_opauc == "sharp" { (a, b) } else { (b, a) };
    let pooled = (win.std_error.powi(2) + lose.std_error.powi(2)).sqrt();
    let ok = (general - closed).abs() <= 1e-3
        && report.winner_by_auc != report.winner_by_opauc
        && win.mean - lose.mean > 3.0 * pooled;
    verdict(
        ok,
        format!(
            "general {general:.5} vs closed form {closed:.5}; AUC winner {}, OpAUC winner {}, simulated {:.3} vs {:.3} (pooled se {pooled:.3})",
            report.winner_by_auc, report.winner_by_opauc, win.mean, lose.mean
        ),
    )
}

fn prioritization_robustness() -> Outcome {
    let p = params(0.1, 0.5);
    let noisy = JointScoreModel::analytic(mixture(), Predictor::GaussianNoiseClipped { sigma: 0.1 }).unwrap();
    let tau_two = two_point_threshold(0.2, &noisy, &p).map_err(|e| e.to_string())?;
    let tau_c = capacity_matching_threshold(0.2, &p);
    let betas = [0.0, 0.25, 0.5, 0.75];
    let mut rows = Vec::new();
    for &beta1 in &betas {
        let config = SimConfig {
            n: 1000,
            m: 200,
            params: p,
            beta1,
            trials: 2000,
            seed: 5,
            binary_mode: false,
        };
        let oracle = grid_oracle(&config, &noisy, 101).map_err(|e| e.to_string())?;
        let est = simulate_thresholds(&config, &noisy, &[tau_two, 0.6, tau_c]).map_err(|e| e.to_string())?;
        let best = oracle.best.mean.max(est[0].mean);
        let rel = |x: f64| ((best - x) / best).max(0.0);
        rows.push((rel(est[0].mean), rel(est[1].mean), rel(est[2].mean)));
    }
    let two_ok = rows.iter().all(|r| r.0 < 0.10);
    let extremes = [rows[0], rows[3]];
    let fixed06 = extremes.iter().any(|r| r.1 > r.0);
    let fixed_c = extremes.iter().any(|r| r.2 > r.0);

    let perfect = mixture_perfect();
    let tau = two_point_threshold(0.2, &perfect, &p).map_err(|e| e.to_string())?;
    let means: Vec<(f64, f64)> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&beta1| {
            let config = SimConfig {
                n: 1000,
                m: 200,
                params: p,
                beta1,
                trials: 2000,
                seed: 6,
                binary_mode: false,
            };
            let e = simulate_thresholds(&config, &perfect, &[tau]).unwrap()[0];
            (e.mean, e.std_error)
        })
        .collect();
    let monotone = means
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 - 3.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let gaps: Vec<String> = rows
        .iter()
        .zip(betas)
        .map(|(r, b)| format!("b1={b}: {:.4}/{:.4}/{:.4}", r.0, r.1, r.2))
        .collect();
    verdict(
        two_ok && fixed06 && fixed_c && monotone,
        format!(
            "rel gaps two-point/fixed(0.6)/fixed(tau_c) {}; perfect-predictor means monotone in b1: {monotone}",
            gaps.join(", ")
        ),
    )
}

const SCENARIO: &str = r#"{
  "version": 1,
  "model": {"kind": "analytic", "true_score": {"kind": "uniform"}, "predictor": {"kind": "perfect"}},
  "behavioral": {"p0": 0.1, "delta_p": 0.5},
  "population": {"n": 400, "m": 80},
  "sweep": {"axis": "rho", "grid": {"start": 0.05, "stop": 0.45, "points": 5}, "simulate": true},
  "policies": [{"kind": "two_point"}, {"kind": "capacity_matching"}, {"kind": "fixed", "tau": 0.8}],
  "beta1": [0.0, 0.5],
  "trials": 600,
  "seed": 17,
  "mu": {"kind": "uniform", "lo": 0.05, "hi": 0.3},
  "candidates": [
    {"name": "clean", "model": {"kind": "analytic", "true_score": {"kind": "uniform"}, "predictor": {"kind": "perfect"}}},
    {"name": "noisy", "model": {"kind": "analytic", "true_score": {"kind": "uniform"}, "predictor": {"kind": "gaussian_noise_clipped", "sigma": 0.2}}}
  ],
  "oracle_grid": 11,
  "validate_n": [100, 400]
}
"#;

/// Runs a subcommand and returns its stdout plus every artifact it wrote.
fn run_cli(dir: &Path, subcommand: &str, extra: &[&str]) -> Result<Vec<u8>, String> {
    let prefix = dir.join("out/run");
    let _ = fs::remove_dir_all(dir.join("out"));
    let output = Command::new(env!("CARGO_BIN_EXE_capflag"))
        .arg(subcommand)
        .arg("--scenario")
        .arg(dir.join("scenario.json"))
        .arg("--out")
        .arg(&prefix)
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!("{subcommand} failed: {}", String::from_utf8_lossy(&output.stderr)));
    }
    let mut bytes = output.stdout;
    if let Ok(entries) = fs::read_dir(dir.join("out")) {
        let mut paths: Vec<_> = entries.map(|e| e.unwrap().path()).collect();
        paths.sort();
        for path in paths {
            bytes.extend(path.file_name().unwrap().to_string_lossy().as_bytes());
            bytes.extend(fs::read(&path).unwrap());
        }
    }
    Ok(bytes)
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    fs::write(dir.path().join("scenario.json"), SCENARIO).map_err(|e| e.to_string())?;
    let mut checked = Vec::new();
    for subcommand in ["threshold", "sweep", "simulate", "opauc", "validate", "oracle"] {
        let first = run_cli(dir.path(), subcommand, &[])?;
        let second = run_cli(dir.path(), subcommand, &[])?;
        let one = run_cli(dir.path(), subcommand, &["--workers", "1"])?;
        let four = run_cli(dir.path(), subcommand, &["--workers", "4"])?;
        if first != second || first != one || first != four {
            return Err(format!("{subcommand}: outputs differ between runs or worker counts"));
        }
        checked.push(subcommand);
    }
    Ok(format!("byte-identical across repeat runs and --workers 1/4 for {}", checked.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("two-point optimality", two_point_optimality),
        ("closed-form anchors", closed_form_anchors),
        ("motivating example", motivating_example),
        ("fluid upper bound and convergence", fluid_bound_and_convergence),
        ("Monte Carlo matches exact oracle", mc_matches_exact),
        ("suboptimality curves", suboptimality_curves),
        ("AUC identities", auc_identities),
        ("OpAUC soundness", opauc_soundness),
        ("prioritization robustness", prioritization_robustness),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
