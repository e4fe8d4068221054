use std::fmt;
use std::io::Write;

use super::csv::fmt_f64;
use super::spec::{ExperimentSpec, Preset};
use crate::bounds::{cvx_l1_bound, cvx_l2_bound, strcvx_l1_bound, strcvx_l2_bound, BoundInputs, ProductForm};
use crate::coupling::{estimate_stability, StabilityEstimate, STABILITY_CSV_HEADER};
use crate::error::Result;
use crate::optimizer::LookaheadConfig;

/// Which pair of stability bounds a cell is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundFamily {
    Convex,
    StronglyConvex,
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundFamily::Convex => "convex",
            BoundFamily::StronglyConvex => "strongly_convex",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub config: LookaheadConfig,
    pub n: usize,
    pub estimate: StabilityEstimate,
    pub family: BoundFamily,
    pub bound_l1: f64,
    pub bound_l2: f64,
    /// Whether every step size lies in the bound family's admissible window.
    pub window_ok: bool,
}

impl StabilityRow {
    /// Empirical l1 stability at least two standard errors below its bound.
    pub fn l1_dominated(&self) -> bool {
        self.estimate.l1_mean + 2.0 * self.estimate.std_error_l1 <= self.bound_l1
    }

    pub fn l2_dominated(&self) -> bool {
        self.estimate.l2_mean + 2.0 * self.estimate.std_error_l2 <= self.bound_l2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySweep {
    pub name: String,
    pub rows: Vec<StabilityRow>,
    pub warnings: Vec<String>,
}

impl StabilitySweep {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{STABILITY_CSV_HEADER},bound_family,bound_l1,bound_l2,bound_l1_ok,bound_l2_ok,window_ok")?;
        for row in &self.rows {
            let mut fields = row.estimate.csv_fields(&row.config, row.n);
            fields.extend([
                row.family.to_string(),
                fmt_f64(row.bound_l1),
                fmt_f64(row.bound_l2),
                row.l1_dominated().to_string(),
                row.l2_dominated().to_string(),
                row.window_ok.to_string(),
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

/// Estimates stability in every grid cell and evaluates the matching bounds
/// on the seed-averaged empirical risks of the same runs.
pub fn run_stability_sweep(spec: &ExperimentSpec) -> Result<StabilitySweep> {
    spec.validate()?;
    let generator = spec.generator_spec()?;
    let model = generator.model()?;
    let f_star = match spec.optimizer.preset {
        Preset::Convex => Some(super::optimal_risk(&generator, spec)?),
        _ => None,
    };
    let plan = spec.plan();
    let (l, mu) = (model.smoothness(), model.strong_convexity());
    let family = if mu > 0.0 { BoundFamily::StronglyConvex } else { BoundFamily::Convex };
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for cell in spec.grid(&model, f_star)? {
        let config = cell.config;
        let window = match family {
            BoundFamily::Convex => config.convex_window_warnings(l),
            BoundFamily::StronglyConvex => config.strongly_convex_window_warnings(l, mu),
        };
        for w in &window {
            warnings.push(format!("alpha={} k={} b={} n={}: {w}", config.alpha, config.k, config.batch_size, cell.n));
        }
        warnings.extend(cell.notes);
        let estimate = estimate_stability(&config, &generator, cell.n, &plan)?;
        let inputs = BoundInputs::from_config(&config, cell.n, l, mu).with_fs_v(estimate.mean_fs_v.clone());
        let outer = config.outer_steps;
        let (bound_l1, bound_l2) = match family {
            BoundFamily::Convex => (cvx_l1_bound(&inputs, outer)?, cvx_l2_bound(&inputs, outer)?),
            BoundFamily::StronglyConvex => (strcvx_l1_bound(&inputs, outer)?, strcvx_l2_bound(&inputs, outer, ProductForm::Squared)?),
        };
        log::info!(
            "alpha={} k={} b={} n={}: l1={:.4e} (bound {:.4e}) l2={:.4e} (bound {:.4e})",
            config.alpha,
            config.k,
            config.batch_size,
            cell.n,
            estimate.l1_mean,
            bound_l1,
            estimate.l2_mean,
            bound_l2
        );
        rows.push(StabilityRow { config, n: cell.n, estimate, family, bound_l1, bound_l2, window_ok: window.is_empty() });
    }
    Ok(StabilitySweep { name: spec.name.clone(), rows, warnings })
}
