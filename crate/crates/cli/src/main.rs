//! `lookahead`: command-line driver for the lookahead-stability library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lookahead_stability::bounds::{preset_convex, preset_strongly_convex, ConvexRegime};
use lookahead_stability::experiments::spec::LossName;
use lookahead_stability::experiments::{
    apply_overrides, emit_plot, parse_override, preflight, run_risk_experiment, run_speedup_experiment, run_stability_sweep, ExperimentSpec, PlotSpec,
};
use lookahead_stability::problems::checks::run_property_suite;
use lookahead_stability::problems::{GeneratorSpec, LossKind};
use lookahead_stability::Error;

const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Parser)]
#[command(name = "lookahead", version, about = "Lookahead stability experiments on synthetic convex problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Settings file (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,

    /// Override a setting, e.g. `--set alpha=0.5` or `--set optimizer.batch=[1,4]`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, env = "LOOKAHEAD_OUT_DIR", default_value = "lookahead-out", global = true)]
    out: PathBuf,

    /// Base seed; replaces the seed in the settings.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Treat step-size window warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the loss-function inequalities on random probes.
    CheckProps,
    /// Estimate stability over a grid and compare with the stability bounds.
    Stability,
    /// Decompose excess risk into generalization gap and optimization error.
    Risk,
    /// Compare excess risk across batch sizes under the convex preset.
    Speedup,
    /// Print preset hyperparameters.
    #[command(group(ArgGroup::new("kind").required(true).args(["convex", "strongly_convex"])))]
    Presets {
        #[arg(long)]
        convex: bool,
        #[arg(long)]
        strongly_convex: bool,
    },
    /// Draw columns of a CSV file as an SVG line plot.
    Plot {
        /// CSV file to read.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: String,
        /// Column to draw; repeat for several.
        #[arg(long, required = true)]
        y: Vec<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        #[arg(long, default_value = "")]
        title: String,
        /// SVG path (default: `<out>/<csv stem>.svg`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PropsSettings {
    model: LossName,
    /// Ridge penalty.
    lambda: f64,
    dim: usize,
    radius: f64,
    noise: f64,
    probes: usize,
    /// Step size of the gradient-map checks; zero means `1/L`.
    eta: f64,
    seed: u64,
}

impl Default for PropsSettings {
    fn default() -> Self {
        PropsSettings { model: LossName::LeastSquares, lambda: 0.5, dim: 5, radius: 1.0, noise: 0.5, probes: 1000, eta: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PresetSettings {
    #[serde(rename = "L")]
    smoothness: f64,
    mu: f64,
    alpha: f64,
    b: usize,
    n: usize,
    #[serde(rename = "c_T")]
    c_t: f64,
    f_star: f64,
}

impl Default for PresetSettings {
    fn default() -> Self {
        PresetSettings { smoothness: 1.0, mu: 0.5, alpha: 0.5, b: 1, n: 100, c_t: 1.0, f_star: 0.25 }
    }
}

enum Failure {
    Validation(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Internal(format!("cannot write {}: {e}", path.display()))
}

fn load_settings<T: Default + Serialize + DeserializeOwned>(cli: &Cli) -> Result<T, Failure> {
    let base: T = match &cli.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.clone(), source })?;
            toml::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {}", path.display(), e.message())))?
        }
        None => T::default(),
    };
    let overrides = cli.overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    Ok(apply_overrides(&base, &overrides)?)
}

fn prepare_out(cli: &Cli) -> Result<(), Failure> {
    std::fs::create_dir_all(&cli.out).map_err(|e| io_failure(&cli.out, e))
}

fn write_out(cli: &Cli, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = cli.out.join(name);
    std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

fn write_resolved<T: Serialize>(cli: &Cli, settings: &T) -> Outcome {
    let text = toml::to_string(settings).map_err(|e| Failure::Internal(e.to_string()))?;
    write_out(cli, RESOLVED_CONFIG, &text)?;
    Ok(())
}

fn report_warnings(cli: &Cli, warnings: &[String]) -> Outcome {
    for w in warnings {
        log::warn!("{w}");
    }
    if cli.strict && !warnings.is_empty() {
        return Err(Failure::Validation(format!("{} step-size warnings with --strict:\n  {}", warnings.len(), warnings.join("\n  "))));
    }
    Ok(())
}

fn experiment_spec(cli: &Cli) -> Result<ExperimentSpec, Failure> {
    let mut spec: ExperimentSpec = load_settings(cli)?;
    if let Some(seed) = cli.seed {
        spec.monte_carlo.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn csv_name(spec: &ExperimentSpec, command: &str) -> String {
    if spec.output.csv.is_empty() {
        format!("{command}.csv")
    } else {
        spec.output.csv.clone()
    }
}

fn check_props(cli: &Cli) -> Outcome {
    let mut s: PropsSettings = load_settings(cli)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    prepare_out(cli)?;
    write_resolved(cli, &s)?;
    let kind = match s.model {
        LossName::LeastSquares => LossKind::LeastSquares,
        LossName::Ridge => LossKind::Ridge { lambda: s.lambda },
        LossName::Logistic => LossKind::Logistic,
    };
    let spec = GeneratorSpec::ball(kind, s.dim, s.radius, s.noise);
    let eta = (s.eta > 0.0).then_some(s.eta);
    let r = run_property_suite(&spec, s.probes, eta, s.seed)?;
    let verdict = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    println!("model={} L={} mu={} probes={}", kind.name(), r.model.smoothness(), r.model.strong_convexity(), s.probes);
    println!("nonnegative: {} (min loss {:.3e})", verdict(r.min_loss >= 0.0), r.min_loss);
    println!("self-bounding: {} (max |grad|^2 / (2 L f) = {:.6})", verdict(r.self_bounding.passed()), r.self_bounding.max_ratio);
    println!("gradient maps: {} (max expansion {:.6} at eta={})", verdict(r.gradient_maps.passed()), r.gradient_maps.max_expansion, r.gradient_maps.eta);
    println!("finite differences: {} (max relative error {:.3e})", verdict(r.gradient_fd.passed()), r.gradient_fd.max_ratio);
    println!("smoothness: {} (max ratio {:.6})", verdict(r.smoothness.passed()), r.smoothness.max_ratio);
    if let Some(sc) = &r.strong_convexity {
        println!("strong convexity: {} (max ratio {:.6})", verdict(sc.passed()), sc.max_ratio);
    }
    println!("cocoercivity (empirical risk): {}", verdict(r.empirical_cocoercivity.passed()));
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Validation("property checks failed".into()))
    }
}

fn stability(cli: &Cli) -> Outcome {
    let spec = experiment_spec(cli)?;
    report_warnings(cli, &preflight(&spec, true)?)?;
    prepare_out(cli)?;
    write_resolved(cli, &spec)?;
    let sweep = run_stability_sweep(&spec)?;
    let path = write_out(cli, &csv_name(&spec, "stability"), &sweep.to_csv_string()?)?;
    let dominated = sweep.rows.iter().filter(|r| r.l1_dominated() && r.l2_dominated()).count();
    println!("{} cells, {dominated} dominated by their bounds; wrote {}", sweep.rows.len(), path.display());
    Ok(())
}

fn risk(cli: &Cli) -> Outcome {
    let spec = experiment_spec(cli)?;
    report_warnings(cli, &preflight(&spec, false)?)?;
    prepare_out(cli)?;
    write_resolved(cli, &spec)?;
    let exp = run_risk_experiment(&spec)?;
    let path = write_out(cli, &csv_name(&spec, "risk"), &exp.to_csv_string()?)?;
    for r in &exp.rows {
        println!(
            "n={} b={} alpha={}: excess {:.4e} +- {:.1e}, gen gap {:.4e}, opt err {:.4e}, identity {}",
            r.n,
            r.config.batch_size,
            r.config.alpha,
            r.excess.mean,
            r.excess.se,
            r.gen_gap.mean,
            r.opt_err.mean,
            if r.identity_holds() { "ok" } else { "VIOLATED" }
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn speedup(cli: &Cli) -> Outcome {
    let spec = experiment_spec(cli)?;
    prepare_out(cli)?;
    write_resolved(cli, &spec)?;
    let report = run_speedup_experiment(&spec)?;
    report_warnings(cli, &report.warnings)?;
    let path = write_out(cli, &csv_name(&spec, "speedup"), &report.to_csv_string()?)?;
    for r in &report.rows {
        match r.excess() {
            Some(e) => println!("b={} eta={:.4} R={}: excess {:.4e} +- {:.1e}", r.b, r.eta, r.total_steps, e.mean, e.se),
            None => println!("b={}: skipped (batch too large for the preset)", r.b),
        }
    }
    println!("intervals overlap: {}; wrote {}", report.overlapping, path.display());
    Ok(())
}

fn presets(cli: &Cli, convex: bool) -> Outcome {
    let s: PresetSettings = load_settings(cli)?;
    prepare_out(cli)?;
    write_resolved(cli, &s)?;
    if convex {
        let p = preset_convex(s.f_star, s.n, s.smoothness, s.b)?;
        let regime = match p.regime {
            ConvexRegime::Noisy => "noisy",
            ConvexRegime::LowNoise => "low_noise",
        };
        println!("eta={}", p.eta);
        println!("R={}", p.total_steps);
        println!("gamma={}", p.gamma);
        println!("regime={regime}");
        println!("valid={}", p.valid);
        let warnings = if p.valid { Vec::new() } else { vec![format!("b={} exceeds sqrt(n F(w*)) / (2L)", s.b)] };
        report_warnings(cli, &warnings)
    } else {
        let p = preset_strongly_convex(s.smoothness, s.mu, s.alpha, s.b, s.n, s.c_t)?;
        println!("eta={}", p.eta);
        println!("k={}", p.k);
        println!("T={}", p.outer_steps);
        report_warnings(cli, &p.warnings)
    }
}

fn plot(cli: &Cli, csv: &Path, spec: PlotSpec, output: Option<&Path>) -> Outcome {
    prepare_out(cli)?;
    let out = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = csv.file_stem().map_or_else(|| "plot".into(), |s| s.to_string_lossy().into_owned());
            cli.out.join(format!("{stem}.svg"))
        }
    };
    let result = emit_plot(csv, &spec, &out)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Internal(format!("cannot start {workers} workers: {e}")))?;
    }
    match &cli.command {
        Command::CheckProps => check_props(cli),
        Command::Stability => stability(cli),
        Command::Risk => risk(cli),
        Command::Speedup => speedup(cli),
        Command::Presets { convex, .. } => presets(cli, *convex),
        Command::Plot { csv, x, y, log_x, log_y, title, output } => {
            let spec = PlotSpec { x: x.clone(), ys: y.clone(), log_x: *log_x, log_y: *log_y, title: title.clone() };
            plot(cli, csv, spec, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Validation(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}
