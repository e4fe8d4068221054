use std::fmt;

use crate::error::{Error, Result};
use crate::problems::Weights;

/// Inner step sizes `eta_{tau,t}`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `table[t - 1][tau]` for outer step `t = 1..=T` and `tau = 0..k`.
    PerStep(Vec<Vec<f64>>),
}

impl StepSchedule {
    /// `eta_{tau,t}` with `t` counted from 1.
    pub fn eta(&self, tau: usize, t: usize) -> f64 {
        match self {
            StepSchedule::Constant(eta) => *eta,
            StepSchedule::PerStep(table) => table[t - 1][tau],
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            StepSchedule::Constant(eta) => Some(*eta),
            StepSchedule::PerStep(_) => None,
        }
    }

    /// The `k` inner step sizes of outer step `t`.
    pub fn inner_steps(&self, t: usize, k: usize) -> Vec<f64> {
        (0..k).map(|tau| self.eta(tau, t)).collect()
    }

    /// Materialises the schedule as `T` rows of `k` entries.
    pub fn table(&self, k: usize, outer_steps: usize) -> Vec<Vec<f64>> {
        (1..=outer_steps).map(|t| self.inner_steps(t, k)).collect()
    }

    pub fn validate(&self, k: usize, outer_steps: usize) -> Result<()> {
        match self {
            StepSchedule::Constant(eta) => {
                if !(eta.is_finite() && *eta > 0.0) {
                    return Err(Error::Config(format!("step size must be positive, got {eta}")));
                }
            }
            StepSchedule::PerStep(table) => {
                if table.len() != outer_steps || table.iter().any(|row| row.len() != k) {
                    return Err(Error::Config(format!("step table must have {outer_steps} rows of {k} entries")));
                }
                if let Some(bad) = table.iter().flatten().find(|e| !(e.is_finite() && **e > 0.0)) {
                    return Err(Error::Config(format!("step sizes must be positive, got {bad}")));
                }
            }
        }
        Ok(())
    }

    fn extremes(&self, k: usize, outer_steps: usize) -> (f64, f64) {
        self.table(k, outer_steps)
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)))
    }
}

/// How much of a run is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordLevel {
    /// Slow weights and minibatch indices only.
    SlowOnly,
    /// Additionally every fast iterate and `F_S` at each inner step.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadConfig {
    /// Slow-weight interpolation factor in `(0, 1]`.
    pub alpha: f64,
    /// Inner steps per outer step.
    pub k: usize,
    /// Number of outer steps `T`.
    pub outer_steps: usize,
    pub schedule: StepSchedule,
    pub batch_size: usize,
    pub seed: u64,
    pub record: RecordLevel,
    /// Starting point; the zero vector when `None`.
    pub w0: Option<Weights>,
}

impl LookaheadConfig {
    pub fn new(alpha: f64, k: usize, outer_steps: usize, eta: f64, batch_size: usize, seed: u64) -> Self {
        LookaheadConfig {
            alpha,
            k,
            outer_steps,
            schedule: StepSchedule::Constant(eta),
            batch_size,
            seed,
            record: RecordLevel::Full,
            w0: None,
        }
    }

    pub fn with_record(mut self, record: RecordLevel) -> Self {
        self.record = record;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_w0(mut self, w0: Weights) -> Self {
        self.w0 = Some(w0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.k == 0 || self.outer_steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("k, T and b must all be at least 1".into()));
        }
        self.schedule.validate(self.k, self.outer_steps)
    }

    /// Total number of inner steps `R = T k`.
    pub fn total_steps(&self) -> usize {
        self.outer_steps * self.k
    }

    pub fn step_table(&self) -> Vec<Vec<f64>> {
        self.schedule.table(self.k, self.outer_steps)
    }

    /// Step-size window of the convex stability bounds: every `eta <= 1/L`.
    pub fn convex_window_warnings(&self, smoothness: f64) -> Vec<WindowWarning> {
        let (_, hi) = self.schedule.extremes(self.k, self.outer_steps);
        let mut out = Vec::new();
        if hi > 1.0 / smoothness {
            out.push(WindowWarning(format!("step size {hi} exceeds 1/L = {}", 1.0 / smoothness)));
        }
        out
    }

    /// Step-size window of the strongly convex stability bounds:
    /// `2 ln 2 / (k mu) <= eta <= 1/L`.
    pub fn strongly_convex_window_warnings(&self, smoothness: f64, mu: f64) -> Vec<WindowWarning> {
        let mut out = self.convex_window_warnings(smoothness);
        if mu <= 0.0 {
            out.push(WindowWarning("strong convexity constant is zero".into()));
            return out;
        }
        let (lo, _) = self.schedule.extremes(self.k, self.outer_steps);
        let floor = 2.0 * std::f64::consts::LN_2 / (self.k as f64 * mu);
        if lo < floor {
            out.push(WindowWarning(format!("step size {lo} is below 2 ln2 / (k mu) = {floor}")));
        }
        out
    }
}

/// A step-size setting that falls outside the window a bound needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowWarning(pub String);

impl fmt::Display for WindowWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_hyperparameters() {
        let ok = LookaheadConfig::new(0.5, 2, 3, 0.1, 1, 0);
        assert!(ok.validate().is_ok());
        assert!(LookaheadConfig { alpha: 0.0, ..ok.clone() }.validate().is_err());
        assert!(LookaheadConfig { alpha: 1.5, ..ok.clone() }.validate().is_err());
        assert!(LookaheadConfig { alpha: 1.0, ..ok.clone() }.validate().is_ok());
        assert!(LookaheadConfig { k: 0, ..ok.clone() }.validate().is_err());
        assert!(LookaheadConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(LookaheadConfig { schedule: StepSchedule::Constant(0.0), ..ok.clone() }.validate().is_err());
        let table = StepSchedule::PerStep(vec![vec![0.1, 0.2]; 2]);
        assert!(LookaheadConfig { schedule: table, ..ok }.validate().is_err());
    }

    #[test]
    fn per_step_table_lookup() {
        let s = StepSchedule::PerStep(vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        assert_eq!(s.eta(1, 2), 0.4);
        assert_eq!(s.inner_steps(1, 2), vec![0.1, 0.2]);
        assert!(s.validate(2, 2).is_ok());
    }

    #[test]
    fn window_checks() {
        let c = LookaheadConfig::new(0.5, 5, 3, 0.6, 1, 0);
        assert!(c.convex_window_warnings(1.5).is_empty());
        assert_eq!(c.convex_window_warnings(2.0).len(), 1);
        // 2 ln2 / (5 * 0.5) = 0.5545
        assert!(c.strongly_convex_window_warnings(1.5, 0.5).is_empty());
        let slow = LookaheadConfig::new(0.5, 5, 3, 0.5, 1, 0);
        assert_eq!(slow.strongly_convex_window_warnings(1.5, 0.5).len(), 1);
    }
}
