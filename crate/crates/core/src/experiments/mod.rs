//! Experiment drivers: stability sweeps against the bounds, risk
//! decomposition, batch-size speedup, and plotting.

pub mod csv;
pub mod plot;
pub mod risk;
pub mod spec;
pub mod speedup;
pub mod stability;

pub use plot::{emit_plot, PlotSpec};
pub use risk::{risk_cell, run_risk_experiment, RiskContext, RiskExperiment, RiskRow};
pub use spec::{apply_overrides, parse_override, ExperimentSpec, GridCell, OutputIterate, Preset};
pub use speedup::{run_speedup_experiment, SpeedupReport, SpeedupRow};
pub use stability::{run_stability_sweep, BoundFamily, StabilityRow, StabilitySweep};

use crate::error::Result;
use crate::problems::GeneratorSpec;
use crate::stats::derive_seed;

const F_STAR_STREAM: u64 = 101;
const HELDOUT_STREAM: u64 = 102;
const RISK_ALGORITHM_STREAM: u64 = 103;

/// `F(w*)` for the spec's generator: exact for the regression families,
/// Monte Carlo otherwise.
pub fn optimal_risk(generator: &GeneratorSpec, spec: &ExperimentSpec) -> Result<f64> {
    let m = &spec.monte_carlo;
    generator.optimal_risk(m.f_star_samples, derive_seed(m.seed, &[F_STAR_STREAM]))
}

/// Step-size window violations and preset notes for every grid cell,
/// computed without running anything. With `strongly_convex_window` set and a
/// strongly convex loss, cells are checked against the strongly convex window;
/// otherwise against `eta <= 1/L`.
pub fn preflight(spec: &ExperimentSpec, strongly_convex_window: bool) -> Result<Vec<String>> {
    spec.validate()?;
    let generator = spec.generator_spec()?;
    let model = generator.model()?;
    let f_star = match spec.optimizer.preset {
        Preset::Convex => Some(optimal_risk(&generator, spec)?),
        _ => None,
    };
    let (l, mu) = (model.smoothness(), model.strong_convexity());
    let mut out = Vec::new();
    for cell in spec.grid(&model, f_star)? {
        let c = &cell.config;
        let window = if strongly_convex_window && mu > 0.0 { c.strongly_convex_window_warnings(l, mu) } else { c.convex_window_warnings(l) };
        let label = format!("alpha={} k={} T={} b={} n={}", c.alpha, c.k, c.outer_steps, c.batch_size, cell.n);
        out.extend(window.iter().map(|w| format!("{label}: {w}")));
        out.extend(cell.notes.iter().map(|note| format!("{label}: {note}")));
    }
    Ok(out)
}
