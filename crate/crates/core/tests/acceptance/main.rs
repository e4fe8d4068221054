//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use lookahead_stability::bounds::{cvx_opt_bound, preset_strongly_convex, strcvx_distance_envelope, BoundInputs};
use lookahead_stability::coupling::exhaustive_stability;
use lookahead_stability::experiments::spec::{LossName, Preset};
use lookahead_stability::experiments::{run_risk_experiment, run_speedup_experiment, run_stability_sweep, ExperimentSpec, RiskRow, SpeedupReport, StabilitySweep};
use lookahead_stability::optimizer::{averaged_iterate, lookahead_run, minibatch_sgd, LookaheadConfig, RecordLevel};
use lookahead_stability::problems::checks::run_property_suite;
use lookahead_stability::problems::{empirical_minimizer, generate_dataset, GeneratorSpec, LossKind, Weights};
use lookahead_stability::stats::{derive_seed, monotone_with_tolerance, rng_from_seed, MeanSe};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn ls_sweep_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::default();
    spec.name = "ls-sweep".into();
    spec.generator.loss = LossName::LeastSquares;
    spec.generator.dim = 5;
    spec.generator.noise = 0.5;
    spec.optimizer.alpha = vec![0.25, 0.5, 1.0];
    spec.optimizer.batch = vec![1, 4];
    spec.optimizer.k = vec![5];
    spec.optimizer.outer_steps = vec![20];
    spec.optimizer.n = vec![64];
    spec.optimizer.eta_l = vec![0.5];
    spec.monte_carlo.datasets = 16;
    spec.monte_carlo.indices = 16;
    spec.monte_carlo.seeds = 2;
    spec.monte_carlo.seed = 2024;
    spec
}

fn ls_sweep() -> &'static StabilitySweep {
    static SWEEP: OnceLock<StabilitySweep> = OnceLock::new();
    SWEEP.get_or_init(|| run_stability_sweep(&ls_sweep_spec()).expect("least-squares sweep"))
}

fn k_sweep() -> &'static StabilitySweep {
    static SWEEP: OnceLock<StabilitySweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let mut spec = ls_sweep_spec();
        spec.optimizer.alpha = vec![0.5];
        spec.optimizer.batch = vec![1];
        spec.optimizer.k = vec![1, 3, 5];
        run_stability_sweep(&spec).expect("k sweep")
    })
}

fn property_suite() -> Outcome {
    let models = [
        ("least squares", GeneratorSpec::ball(LossKind::LeastSquares, 5, 1.0, 0.5)),
        ("ridge", GeneratorSpec::ball(LossKind::Ridge { lambda: 0.5 }, 5, 1.0, 0.5)),
        ("logistic", GeneratorSpec::ball(LossKind::Logistic, 5, 1.0, 0.0)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, spec)) in models.iter().enumerate() {
        let report = run_property_suite(spec, 1000, None, 77 + i as u64).expect("property suite");
        pass &= report.passed() && report.self_bounding.probes >= 1000;
        parts.push(format!("{name} {}", if report.passed() { "ok" } else { "violated" }));
    }
    Outcome::new(pass, format!("1000 probes each: {}", parts.join(", ")))
}

fn degeneracy() -> Outcome {
    let mut rng = rng_from_seed(4242);
    let mut matched = 0;
    for c in 0..20u64 {
        let kind = match c % 3 {
            0 => LossKind::LeastSquares,
            1 => LossKind::Ridge { lambda: rng.random_range(0.05..1.0) },
            _ => LossKind::Logistic,
        };
        let dim = rng.random_range(1..7);
        let n = rng.random_range(1..50);
        let b = rng.random_range(1..9);
        let steps = rng.random_range(1..40);
        let spec = GeneratorSpec::ball(kind, dim, rng.random_range(0.5..2.0), 0.3);
        let model = spec.model().unwrap();
        let eta = rng.random_range(0.05..1.0) / model.smoothness();
        let data = generate_dataset(&spec, n, c).unwrap();
        let seed = derive_seed(99, &[c]);
        let traj = lookahead_run(&LookaheadConfig::new(1.0, 1, steps, eta, b, seed), &model, &data).unwrap();
        let sgd = minibatch_sgd(&model, &data, &Weights::zeros(dim), &vec![eta; steps], b, seed).unwrap();
        if traj.slow == sgd {
            matched += 1;
        }
    }
    Outcome::new(matched == 20, format!("{matched}/20 configurations bit-identical"))
}

fn exhaustive() -> Outcome {
    let spec = GeneratorSpec::ball(LossKind::LeastSquares, 3, 1.0, 0.5);
    let model = spec.model().unwrap();
    let data = generate_dataset(&spec, 4, 5).unwrap();
    let replacements = generate_dataset(&spec, 4, 6).unwrap().points().to_vec();
    let (alpha, eta) = (0.7, 0.4);
    let config = LookaheadConfig::new(alpha, 1, 1, eta, 1, 0);
    let est = exhaustive_stability(&config, &model, &data, &replacements).unwrap();
    // Of the 16 (i, j) outcomes only j = i moves the runs apart, by alpha eta |grad difference| at w_0 = 0.
    let w0 = Weights::zeros(3);
    let (mut l1, mut l2) = (0.0, 0.0);
    for (z, zp) in data.points().iter().zip(&replacements) {
        let d = (model.loss_grad(&w0, z).unwrap() - model.loss_grad(&w0, zp).unwrap()).norm() * alpha * eta;
        l1 += d / 16.0;
        l2 += d * d / 16.0;
    }
    let e1 = (est.l1_mean - l1).abs() / l1;
    let e2 = (est.l2_mean - l2).abs() / l2;
    Outcome::new(est.samples == 16 && e1 <= 1e-12 && e2 <= 1e-12, format!("16 outcomes, relative error l1 {e1:.1e}, l2 {e2:.1e}"))
}

fn domination(sweep: &StabilitySweep) -> Outcome {
    let bad: Vec<String> = sweep
        .rows
        .iter()
        .filter(|r| !(r.l1_dominated() && r.l2_dominated() && r.window_ok))
        .map(|r| format!("alpha={} b={} k={}", r.config.alpha, r.config.batch_size, r.config.k))
        .collect();
    let min_samples = sweep.rows.iter().map(|r| r.estimate.samples).min().unwrap_or(0);
    let tightest = sweep
        .rows
        .iter()
        .map(|r| ((r.estimate.l1_mean + 2.0 * r.estimate.std_error_l1) / r.bound_l1).max((r.estimate.l2_mean + 2.0 * r.estimate.std_error_l2) / r.bound_l2))
        .fold(0.0, f64::max);
    Outcome::new(
        bad.is_empty() && min_samples >= 200,
        format!("{} cells, {min_samples} samples each, largest (estimate + 2 SE) / bound = {tightest:.3e}{}", sweep.rows.len(), if bad.is_empty() { String::new() } else { format!(", failing: {}", bad.join("; ")) }),
    )
}

fn convex_domination() -> Outcome {
    domination(ls_sweep())
}

fn strongly_convex_domination() -> Outcome {
    let mut spec = ls_sweep_spec();
    spec.name = "ridge-sweep".into();
    spec.generator.loss = LossName::Ridge;
    spec.generator.lambda = 0.5;
    // L = 1.5 and mu = 0.5; with k = 5 the admissible step sizes are [0.5545, 0.6667].
    spec.optimizer.eta = vec![0.6];
    domination(&run_stability_sweep(&spec).expect("ridge sweep"))
}

fn trends() -> Outcome {
    let sweep = ls_sweep();
    let est = |alpha: f64, b: usize| sweep.rows.iter().find(|r| r.config.alpha == alpha && r.config.batch_size == b).map(|r| &r.estimate).unwrap();
    let l1 = |e: &lookahead_stability::coupling::StabilityEstimate| MeanSe { mean: e.l1_mean, se: e.std_error_l1, count: e.samples };
    let l2 = |e: &lookahead_stability::coupling::StabilityEstimate| MeanSe { mean: e.l2_mean, se: e.std_error_l2, count: e.samples };
    let alphas = [0.25, 0.5, 1.0];
    let alpha_ok = [1, 4].iter().all(|&b| monotone_with_tolerance(&alphas.map(|a| l1(est(a, b))), true, 2.0));
    let batch_ok = alphas.iter().all(|&a| monotone_with_tolerance(&[l2(est(a, 1)), l2(est(a, 4))], false, 2.0));
    let ks: Vec<MeanSe> = k_sweep().rows.iter().map(|r| l1(&r.estimate)).collect();
    let k_ok = ks.windows(2).all(|w| w[1].mean > w[0].mean) && monotone_with_tolerance(&ks, true, 2.0);
    Outcome::new(
        alpha_ok && batch_ok && k_ok,
        format!(
            "l1 in alpha (b=1): {:.3e} {:.3e} {:.3e}; l2 in b (alpha=0.5): {:.3e} {:.3e}; l1 in k: {:.3e} {:.3e} {:.3e}",
            est(0.25, 1).l1_mean,
            est(0.5, 1).l1_mean,
            est(1.0, 1).l1_mean,
            est(0.5, 1).l2_mean,
            est(0.5, 4).l2_mean,
            ks[0].mean,
            ks[1].mean,
            ks[2].mean
        ),
    )
}

fn optimization_error() -> Outcome {
    let spec = GeneratorSpec::ball(LossKind::LeastSquares, 5, 1.0, 0.5);
    let model = spec.model().unwrap();
    let (n, b, eta, alpha, k, outer) = (64, 2, 0.5, 0.5, 5, 20);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let datasets = 4;
    for d in 0..datasets {
        let data = generate_dataset(&spec, n, derive_seed(7, &[d])).unwrap();
        let (w_s, fs_ws) = empirical_minimizer(&model, &data).unwrap();
        let gaps: Vec<f64> = (0..50)
            .map(|s| {
                let config = LookaheadConfig::new(alpha, k, outer, eta, b, derive_seed(8, &[d, s])).with_record(RecordLevel::Full);
                let traj = lookahead_run(&config, &model, &data).unwrap();
                model.empirical_risk(&averaged_iterate(&traj).unwrap(), &data).unwrap() - fs_ws
            })
            .collect();
        let mean = MeanSe::from_samples(&gaps).mean;
        let mut inputs = BoundInputs::from_config(&LookaheadConfig::new(alpha, k, outer, eta, b, 0), n, model.smoothness(), 0.0);
        inputs.fs_ws = fs_ws;
        inputs.dist0 = w_s.norm_squared();
        let bound = cvx_opt_bound(&inputs).unwrap();
        pass &= mean <= bound;
        worst = worst.max(mean / bound);
    }
    Outcome::new(pass, format!("{datasets} datasets x 50 seeds, largest seed-averaged error / bound = {worst:.3}"))
}

fn contraction() -> Outcome {
    let spec = GeneratorSpec::ball(LossKind::Ridge { lambda: 0.5 }, 5, 1.0, 0.5);
    let model = spec.model().unwrap();
    let (l, mu, n, b, alpha) = (model.smoothness(), model.strong_convexity(), 100, 1, 0.1);
    let p = preset_strongly_convex(l, mu, alpha, b, n, 3.0).unwrap();
    let mut pass = p.alpha_ok;
    let mut worst: f64 = 0.0;
    let datasets = 4;
    for d in 0..datasets {
        let data = generate_dataset(&spec, n, derive_seed(11, &[d])).unwrap();
        let (w_s, fs_ws) = empirical_minimizer(&model, &data).unwrap();
        let seeds = 50;
        let mut mean_sq = vec![0.0; p.outer_steps + 1];
        for s in 0..seeds {
            let config = LookaheadConfig::new(alpha, p.k, p.outer_steps, p.eta, b, derive_seed(12, &[d, s])).with_record(RecordLevel::SlowOnly);
            let traj = lookahead_run(&config, &model, &data).unwrap();
            for (acc, w) in mean_sq.iter_mut().zip(&traj.slow) {
                *acc += (w - &w_s).norm_squared() / seeds as f64;
            }
        }
        let mut inputs = BoundInputs::from_config(&LookaheadConfig::new(alpha, p.k, p.outer_steps, p.eta, b, 0), n, l, mu);
        inputs.fs_ws = fs_ws;
        inputs.dist0 = w_s.norm_squared();
        let envelope = strcvx_distance_envelope(&inputs).unwrap();
        for (m, (decay, floor)) in mean_sq.iter().zip(&envelope) {
            let allowed = 1.2 * (decay + floor);
            pass &= *m <= allowed;
            worst = worst.max(m / allowed);
        }
    }
    Outcome::new(
        pass,
        format!("eta={:.4} k={} T={} over {datasets} datasets x 50 seeds, largest distance / (1.2 envelope) = {worst:.3}", p.eta, p.k, p.outer_steps),
    )
}

fn fast_rate_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::default();
    spec.name = "ridge-fast-rate".into();
    spec.generator.loss = LossName::Ridge;
    spec.generator.lambda = 0.5;
    spec.generator.dim = 5;
    spec.generator.noise = 1.0;
    spec.optimizer.preset = Preset::StronglyConvex;
    spec.optimizer.alpha = vec![0.1];
    // A larger batch lowers the optimizer's noise floor, which does not shrink with n.
    spec.optimizer.batch = vec![8];
    spec.optimizer.n = vec![200, 800];
    spec.optimizer.c_t = 12.0;
    spec.monte_carlo.datasets = 100;
    spec.monte_carlo.seeds = 2;
    spec.monte_carlo.seed = 31;
    spec
}

fn fast_rate_rows() -> &'static Vec<RiskRow> {
    static ROWS: OnceLock<Vec<RiskRow>> = OnceLock::new();
    ROWS.get_or_init(|| run_risk_experiment(&fast_rate_spec()).expect("fast-rate experiment").rows)
}

fn fast_rate() -> Outcome {
    let rows = fast_rate_rows();
    let (small, large) = (&rows[0].excess, &rows[1].excess);
    let ratio = small.mean / large.mean;
    let expected = rows[1].n as f64 / rows[0].n as f64;
    Outcome::new(
        ratio >= expected / 2.0 && ratio <= expected * 2.0,
        format!(
            "excess n={}: {:.3e} +- {:.1e}, n={}: {:.3e} +- {:.1e}, ratio {ratio:.2} (expected {expected} within 2x), T={} k={}",
            rows[0].n, small.mean, small.se, rows[1].n, large.mean, large.se, rows[0].config.outer_steps, rows[0].config.k
        ),
    )
}

fn speedup_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::default();
    spec.name = "ls-speedup".into();
    spec.generator.loss = LossName::LeastSquares;
    spec.generator.dim = 5;
    spec.generator.noise = 1.0;
    spec.optimizer.alpha = vec![0.5];
    spec.optimizer.k = vec![5];
    spec.optimizer.batch = vec![1, 2, 4];
    spec.optimizer.n = vec![256];
    spec.monte_carlo.datasets = 50;
    spec.monte_carlo.seeds = 2;
    spec.monte_carlo.seed = 57;
    spec
}

fn speedup_report() -> &'static SpeedupReport {
    static REPORT: OnceLock<SpeedupReport> = OnceLock::new();
    REPORT.get_or_init(|| run_speedup_experiment(&speedup_spec()).expect("speedup experiment"))
}

fn speedup() -> Outcome {
    let report = speedup_report();
    let all_valid = report.rows.iter().all(|r| r.valid);
    let cells: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            let e = r.excess().unwrap();
            format!("b={} eta={:.3} R={}: {:.3e} +- {:.1e}", r.b, r.eta, r.total_steps, e.mean, e.se)
        })
        .collect();
    Outcome::new(all_valid && report.overlapping, format!("F(w*)={:.3}; {}", report.f_star, cells.join("; ")))
}

fn decomposition() -> Outcome {
    let mut logistic = speedup_spec();
    logistic.name = "logistic-risk".into();
    logistic.generator.loss = LossName::Logistic;
    logistic.optimizer.batch = vec![2];
    logistic.optimizer.n = vec![128];
    logistic.optimizer.eta_l = vec![0.5];
    logistic.monte_carlo.datasets = 10;
    logistic.monte_carlo.heldout = 20_000;
    logistic.monte_carlo.f_star_samples = 200_000;
    let logistic_rows = run_risk_experiment(&logistic).expect("logistic risk").rows;

    let mut rows: Vec<&RiskRow> = fast_rate_rows().iter().collect();
    rows.extend(speedup_report().rows.iter().filter_map(|r| r.risk.as_ref()));
    rows.extend(logistic_rows.iter());
    let identity = rows.iter().all(|r| r.identity_holds());
    let unbiased = rows.iter().all(|r| r.f_star_consistent());
    let worst = rows.iter().map(|r| r.identity_residual.abs()).fold(0.0, f64::max);
    Outcome::new(
        identity && unbiased,
        format!("{} risk cells, largest |residual| {worst:.1e}, E[F_S(w*)] = F(w*) within 3 SE: {unbiased}", rows.len()),
    )
}

fn reproducibility() -> Outcome {
    let mut spec = ls_sweep_spec();
    spec.optimizer.alpha = vec![0.25];
    spec.optimizer.batch = vec![1];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_stability_sweep(&spec).unwrap().to_csv_string().unwrap())
    };
    let (a, b, c) = (run(4), run(4), run(1));
    Outcome::new(a == b && a == c, format!("{} bytes, identical across reruns and worker counts: {}", a.len(), a == b && a == c))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, u64, Check); 12] = [
        (1, "loss property suite", 10, property_suite),
        (2, "degenerate lookahead equals minibatch SGD", 10, degeneracy),
        (3, "exhaustive stability matches closed form", 5, exhaustive),
        (4, "convex stability bounds dominate", 600, convex_domination),
        (5, "strongly convex stability bounds dominate", 600, strongly_convex_domination),
        (6, "stability trends in alpha, b and k", 600, trends),
        (7, "convex optimization error bound dominates", 120, optimization_error),
        (8, "strongly convex distance contraction", 120, contraction),
        (9, "excess risk scales as 1/n", 900, fast_rate),
        (10, "linear speedup in batch size", 900, speedup),
        (11, "risk decomposition identity", 900, decomposition),
        (12, "byte-identical reruns", 60, reproducibility),
    ];
    let mut failures = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = outcome.pass && in_time;
        if !pass {
            failures += 1;
        }
        let timing = if in_time { String::new() } else { format!(", over the {limit}s limit") };
        println!("criterion {id} {name}: {} ({}; {:.2}s{timing})", if pass { "PASS" } else { "FAIL" }, outcome.detail, elapsed.as_secs_f64());
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
