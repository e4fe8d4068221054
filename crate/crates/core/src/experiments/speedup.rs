use std::io::Write;

use super::csv::fmt_f64;
use super::risk::{risk_cell, RiskContext, RiskRow};
use super::spec::{ExperimentSpec, GridCell, Preset};
use crate::bounds::{preset_convex, ConvexRegime};
use crate::error::{Error, Result};
use crate::optimizer::{LookaheadConfig, RecordLevel};
use crate::stats::MeanSe;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub b: usize,
    pub eta: f64,
    pub k: usize,
    pub outer_steps: usize,
    /// Inner-step budget `ceil(n / b)` from the preset.
    pub total_steps: usize,
    pub n: usize,
    /// `None` when the cell was skipped because `b` is too large.
    pub risk: Option<RiskRow>,
    pub valid: bool,
}

impl SpeedupRow {
    /// Excess risk of the averaged iterate.
    pub fn excess(&self) -> Option<&MeanSe> {
        self.risk.as_ref().map(|r| &r.excess)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub name: String,
    pub f_star: f64,
    pub rows: Vec<SpeedupRow>,
    /// Every pair of valid cells with the same `n` has overlapping
    /// two-standard-error intervals of excess risk.
    pub overlapping: bool,
    pub warnings: Vec<String>,
}

pub const SPEEDUP_CSV_HEADER: &str = "b,eta,k,T,R,n,excess_mean,excess_se,valid";

impl SpeedupReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SPEEDUP_CSV_HEADER}")?;
        for r in &self.rows {
            let (mean, se) = r.excess().map_or((String::new(), String::new()), |m| (fmt_f64(m.mean), fmt_f64(m.se)));
            writeln!(out, "{},{},{},{},{},{},{},{},{}", r.b, fmt_f64(r.eta), r.k, r.outer_steps, r.total_steps, r.n, mean, se, r.valid)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV is ASCII"))
    }
}

/// For each batch size, trains with the noisy-regime convex preset
/// (`eta = b / sqrt(n F(w*))`, `R = ceil(n / b)`) at fixed `k` and the first
/// listed `alpha`, and compares the excess risk of the averaged iterate.
pub fn run_speedup_experiment(spec: &ExperimentSpec) -> Result<SpeedupReport> {
    spec.validate()?;
    let mut spec = spec.clone();
    spec.optimizer.preset = Preset::Convex;
    let ctx = RiskContext::new(&spec)?;
    let l = ctx.model.smoothness();
    let (alpha, k) = (spec.optimizer.alpha[0], spec.optimizer.k[0]);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &n in &spec.optimizer.n {
        for &b in &spec.optimizer.batch {
            let p = preset_convex(ctx.f_star, n, l, b)?;
            if p.regime != ConvexRegime::Noisy {
                return Err(Error::Precondition(format!("F(w*) = {} is below 1/n = {}; the speedup regime needs F(w*) >= 1/n", ctx.f_star, 1.0 / n as f64)));
            }
            let outer_steps = p.total_steps.div_ceil(k);
            let mut row = SpeedupRow { b, eta: p.eta, k, outer_steps, total_steps: p.total_steps, n, risk: None, valid: p.valid };
            if p.valid {
                let mut config = LookaheadConfig::new(alpha, k, outer_steps, p.eta, b, spec.monte_carlo.seed).with_record(RecordLevel::Full);
                if !spec.optimizer.w0.is_empty() {
                    config.w0 = Some(crate::problems::Weights::from_vec(spec.optimizer.w0.clone()));
                }
                let cell = GridCell { config, n, gamma: Some(p.gamma), notes: Vec::new() };
                row.risk = Some(risk_cell(&ctx, &cell)?);
            } else {
                warnings.push(format!("n={n} b={b}: batch exceeds sqrt(n F(w*)) / (2L), skipped"));
            }
            rows.push(row);
        }
    }
    let overlapping = rows.iter().all(|a| {
        rows.iter().filter(|b| b.n == a.n).all(|b| match (&a.risk, &b.risk) {
            (Some(x), Some(y)) => {
                let (x, y) = (&x.excess, &y.excess);
                let (xl, xh) = x.interval(2.0);
                let (yl, yh) = y.interval(2.0);
                xl <= yh && yl <= xh
            }
            _ => true,
        })
    });
    Ok(SpeedupReport { name: spec.name.clone(), f_star: ctx.f_star, rows, overlapping, warnings })
}
