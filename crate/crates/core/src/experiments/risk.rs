use std::io::Write;

use rayon::prelude::*;

use super::csv::fmt_f64;
use super::spec::{ExperimentSpec, GridCell, OutputIterate};
use super::{HELDOUT_STREAM, RISK_ALGORITHM_STREAM};
use crate::bounds::{cvx_excess_shape, strcvx_excess_shape, BoundInputs};
use crate::coupling::seeds;
use crate::error::Result;
use crate::optimizer::{averaged_iterate, lookahead_run, LookaheadConfig, RecordLevel};
use crate::problems::{empirical_minimizer, generate_dataset, Dataset, GeneratorSpec, LossModel, Weights};
use crate::stats::{combined_se, derive_seed, MeanSe};

/// Risk decomposition of one grid cell, averaged over datasets and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub config: LookaheadConfig,
    pub n: usize,
    /// The iterate that was evaluated (`Slow` or `Averaged`).
    pub output: OutputIterate,
    pub replicates: usize,
    /// `F_S(out)`
    pub emp_risk: MeanSe,
    /// `F(out)`
    pub pop_risk: MeanSe,
    /// `F(out) - F_S(out)`
    pub gen_gap: MeanSe,
    /// `F_S(out) - F_S(w_S)`
    pub opt_err: MeanSe,
    /// `F(out) - F(w*)`
    pub excess: MeanSe,
    /// `F_S(w_S) - F(w*)`
    pub fs_ws_gap: MeanSe,
    /// `F_S(w*)`, an unbiased estimate of `F(w*)`.
    pub fs_w_star: MeanSe,
    /// `F_S(w_S)`
    pub fs_ws: MeanSe,
    /// `||w_0 - w_S||^2`
    pub dist0: MeanSe,
    pub f_star: f64,
    /// `mean(excess) - mean(gen_gap) - mean(opt_err) - mean(fs_ws_gap)`
    pub identity_residual: f64,
    /// Three combined standard errors of the four terms.
    pub identity_tolerance: f64,
    pub bound_excess_shape: f64,
}

impl RiskRow {
    /// Excess risk equals generalization gap plus optimization error plus
    /// `F_S(w_S) - F(w*)`, within three combined standard errors.
    pub fn identity_holds(&self) -> bool {
        self.identity_residual.abs() <= self.identity_tolerance + 1e-12 * (1.0 + self.excess.mean.abs())
    }

    /// `E[F_S(w*)] = F(w*)` within three standard errors.
    pub fn f_star_consistent(&self) -> bool {
        (self.fs_w_star.mean - self.f_star).abs() <= 3.0 * self.fs_w_star.se + 1e-12
    }
}

pub const RISK_CSV_HEADER: &str = "alpha,k,T,b,n,eta,output,replicates,emp_risk,emp_risk_se,pop_risk,pop_risk_se,gen_gap,gen_gap_se,opt_err,opt_err_se,excess,excess_se,fs_ws_gap,fs_ws_gap_se,f_star,identity_residual,identity_ok,f_star_ok,bound_excess_shape";

#[derive(Debug, Clone, PartialEq)]
pub struct RiskExperiment {
    pub name: String,
    pub rows: Vec<RiskRow>,
    pub warnings: Vec<String>,
}

impl RiskExperiment {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{RISK_CSV_HEADER}")?;
        for r in &self.rows {
            let c = &r.config;
            let eta = c.step_table().iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut fields = vec![fmt_f64(c.alpha), c.k.to_string(), c.outer_steps.to_string(), c.batch_size.to_string(), r.n.to_string(), fmt_f64(eta)];
            fields.push(match r.output {
                OutputIterate::Averaged => "averaged".into(),
                _ => "slow".into(),
            });
            fields.push(r.replicates.to_string());
            for m in [&r.emp_risk, &r.pop_risk, &r.gen_gap, &r.opt_err, &r.excess, &r.fs_ws_gap] {
                fields.push(fmt_f64(m.mean));
                fields.push(fmt_f64(m.se));
            }
            fields.extend([
                fmt_f64(r.f_star),
                fmt_f64(r.identity_residual),
                r.identity_holds().to_string(),
                r.f_star_consistent().to_string(),
                fmt_f64(r.bound_excess_shape),
            ]);
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV is ASCII"))
    }
}

/// Shared inputs of every cell in a risk experiment.
pub struct RiskContext {
    pub generator: GeneratorSpec,
    pub model: LossModel,
    pub f_star: f64,
    /// Held-out sample for losses without a closed-form population risk.
    pub heldout: Option<Dataset>,
    pub datasets: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub output: OutputIterate,
}

impl RiskContext {
    pub fn new(spec: &ExperimentSpec) -> Result<Self> {
        let generator = spec.generator_spec()?;
        let model = generator.model()?;
        let f_star = super::optimal_risk(&generator, spec)?;
        let m = &spec.monte_carlo;
        let heldout = if generator.population_risk(&Weights::zeros(generator.dim)).is_some() {
            None
        } else {
            Some(generate_dataset(&generator, m.heldout.max(1), derive_seed(m.seed, &[HELDOUT_STREAM]))?)
        };
        Ok(RiskContext { generator, model, f_star, heldout, datasets: m.datasets, seeds: m.seeds, base_seed: m.seed, output: spec.optimizer.output })
    }

    fn resolved_output(&self) -> OutputIterate {
        match self.output {
            OutputIterate::Auto if self.model.strong_convexity() > 0.0 => OutputIterate::Slow,
            OutputIterate::Auto => OutputIterate::Averaged,
            other => other,
        }
    }

    fn population_risk(&self, w: &Weights) -> Result<f64> {
        match (&self.heldout, self.generator.population_risk(w)) {
            (_, Some(v)) => Ok(v),
            (Some(h), None) => self.model.empirical_risk(w, h),
            (None, None) => unreachable!("held-out sample exists whenever there is no closed form"),
        }
    }
}

struct Replicate {
    emp: f64,
    pop: f64,
    fs_ws: f64,
    fs_w_star: f64,
    dist0: f64,
}

/// Trains on `datasets x seeds` replicates of one cell and decomposes the
/// excess risk of the output iterate.
pub fn risk_cell(ctx: &RiskContext, cell: &GridCell) -> Result<RiskRow> {
    let n = cell.n;
    let output = ctx.resolved_output();
    let record = if output == OutputIterate::Averaged { RecordLevel::Full } else { RecordLevel::SlowOnly };
    let base = ctx.base_seed;
    let w_star = ctx.generator.population_minimizer();

    let fits: Vec<(Dataset, Weights, f64)> = (0..ctx.datasets)
        .into_par_iter()
        .map(|d| {
            let data = generate_dataset(&ctx.generator, n, seeds::dataset(base, d))?;
            let (w_s, fs_ws) = empirical_minimizer(&ctx.model, &data)?;
            Ok((data, w_s, fs_ws))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..ctx.datasets).flat_map(|d| (0..ctx.seeds).map(move |s| (d, s))).collect();
    let reps: Vec<Replicate> = jobs
        .par_iter()
        .map(|&(d, s)| {
            let (data, w_s, fs_ws) = &fits[d];
            let config = cell.config.clone().with_record(record).with_seed(derive_seed(base, &[RISK_ALGORITHM_STREAM, d as u64, s as u64]));
            let traj = lookahead_run(&config, &ctx.model, data)?;
            let out = match output {
                OutputIterate::Averaged => averaged_iterate(&traj)?,
                _ => traj.final_slow().clone(),
            };
            let w0 = &traj.slow[0];
            Ok(Replicate {
                emp: ctx.model.empirical_risk(&out, data)?,
                pop: ctx.population_risk(&out)?,
                fs_ws: *fs_ws,
                fs_w_star: ctx.model.empirical_risk(&w_star, data)?,
                dist0: (w0 - w_s).norm_squared(),
            })
        })
        .collect::<Result<_>>()?;

    let stat = |f: &dyn Fn(&Replicate) -> f64| MeanSe::from_samples(&reps.iter().map(f).collect::<Vec<_>>());
    let f_star = ctx.f_star;
    let emp_risk = stat(&|r| r.emp);
    let pop_risk = stat(&|r| r.pop);
    let gen_gap = stat(&|r| r.pop - r.emp);
    let opt_err = stat(&|r| r.emp - r.fs_ws);
    let excess = stat(&|r| r.pop - f_star);
    let fs_ws_gap = stat(&|r| r.fs_ws - f_star);
    let fs_w_star = stat(&|r| r.fs_w_star);
    let fs_ws = stat(&|r| r.fs_ws);
    let dist0 = stat(&|r| r.dist0);
    let identity_residual = excess.mean - gen_gap.mean - opt_err.mean - fs_ws_gap.mean;
    let identity_tolerance = 3.0 * combined_se(&[excess.se, gen_gap.se, opt_err.se, fs_ws_gap.se]);

    let mut inputs = BoundInputs::from_config(&cell.config, n, ctx.model.smoothness(), ctx.model.strong_convexity());
    inputs.f_star = f_star;
    inputs.fs_ws = fs_ws.mean;
    inputs.dist0 = dist0.mean;
    inputs.gamma = cell.gamma.unwrap_or(1.0);
    let bound_excess_shape = if inputs.mu > 0.0 && output == OutputIterate::Slow {
        strcvx_excess_shape(&inputs)?
    } else {
        cvx_excess_shape(&inputs, cell.config.total_steps())?
    };

    Ok(RiskRow {
        config: cell.config.clone(),
        n,
        output,
        replicates: reps.len(),
        emp_risk,
        pop_risk,
        gen_gap,
        opt_err,
        excess,
        fs_ws_gap,
        fs_w_star,
        fs_ws,
        dist0,
        f_star,
        identity_residual,
        identity_tolerance,
        bound_excess_shape,
    })
}

/// Runs [`risk_cell`] over the spec's grid. Datasets are shared across
/// cells with the same `n`, so cells differ only in the optimizer.
pub fn run_risk_experiment(spec: &ExperimentSpec) -> Result<RiskExperiment> {
    spec.validate()?;
    let ctx = RiskContext::new(spec)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for cell in spec.grid(&ctx.model, Some(ctx.f_star))? {
        warnings.extend(cell.notes.iter().cloned());
        warnings.extend(cell.config.convex_window_warnings(ctx.model.smoothness()).into_iter().map(|w| w.to_string()));
        let row = risk_cell(&ctx, &cell)?;
        if !row.identity_holds() {
            warnings.push(format!("decomposition residual {} exceeds tolerance {}", row.identity_residual, row.identity_tolerance));
        }
        rows.push(row);
    }
    Ok(RiskExperiment { name: spec.name.clone(), rows, warnings })
}
