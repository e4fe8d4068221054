//! Closed-form stability, generalization, optimization and excess-risk
//! bounds, evaluated on realized trajectory statistics, and the
//! hyperparameter presets that go with them.
//!
//! Functions taking `outer` bound the slow iterate after `outer` outer steps,
//! summing over outer steps `h = 1..=outer` and inner steps `j = 0..k`.

use std::fmt;

use crate::error::{Error, Result};
use crate::optimizer::LookaheadConfig;
use crate::problems::{Dataset, LossModel, Weights};

/// Every quantity the bounds are expressed in.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub alpha: f64,
    pub k: usize,
    /// Outer steps `T`.
    pub outer_steps: usize,
    pub b: usize,
    pub n: usize,
    /// Smoothness `L`.
    pub smoothness: f64,
    /// Strong convexity `mu` (zero for merely convex losses).
    pub mu: f64,
    pub gamma: f64,
    /// `eta[h - 1][j]`
    pub eta: Vec<Vec<f64>>,
    /// `fs_v[h - 1][j]`, the mean of `F_S(v_{j,h})` over runs.
    pub fs_v: Vec<Vec<f64>>,
    /// `F_S(w_S)`
    pub fs_ws: f64,
    /// `||w_0 - w_S||^2`
    pub dist0: f64,
    /// `F(w*)`
    pub f_star: f64,
}

impl BoundInputs {
    /// Inputs carrying the hyperparameters of `config`; risk fields start at zero.
    pub fn from_config(config: &LookaheadConfig, n: usize, smoothness: f64, mu: f64) -> Self {
        BoundInputs {
            alpha: config.alpha,
            k: config.k,
            outer_steps: config.outer_steps,
            b: config.batch_size,
            n,
            smoothness,
            mu,
            gamma: 1.0,
            eta: config.step_table(),
            fs_v: Vec::new(),
            fs_ws: 0.0,
            dist0: 0.0,
            f_star: 0.0,
        }
    }

    pub fn with_fs_v(mut self, fs_v: Vec<Vec<f64>>) -> Self {
        self.fs_v = fs_v;
        self
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn bf(&self) -> f64 {
        self.b as f64
    }

    fn check_outer(&self, outer: usize) -> Result<()> {
        if outer == 0 {
            return Err(Error::Precondition("bounds need at least one outer step".into()));
        }
        if self.eta.len() < outer || self.eta.iter().take(outer).any(|row| row.len() < self.k) {
            return Err(Error::MissingData(format!("step table does not cover {outer} outer steps of {} inner steps", self.k)));
        }
        if self.fs_v.len() < outer || self.fs_v.iter().take(outer).any(|row| row.len() < self.k) {
            return Err(Error::MissingData(format!("F_S(v) table does not cover {outer} outer steps of {} inner steps", self.k)));
        }
        Ok(())
    }

    /// The single step size of a constant schedule.
    pub fn constant_eta(&self) -> Result<f64> {
        let first = *self.eta.first().and_then(|row| row.first()).ok_or_else(|| Error::MissingData("empty step table".into()))?;
        if self.eta.iter().flatten().any(|&e| e != first) {
            return Err(Error::Precondition("this bound needs a constant step size".into()));
        }
        Ok(first)
    }

    fn require_mu(&self) -> Result<()> {
        if self.mu > 0.0 {
            Ok(())
        } else {
            Err(Error::Precondition("strongly convex bounds need mu > 0; use the convex bounds".into()))
        }
    }

    fn digest(&self) -> String {
        format!(
            "alpha={} k={} T={} b={} n={} L={} mu={} gamma={} fs_ws={} dist0={} f_star={}",
            self.alpha, self.k, self.outer_steps, self.b, self.n, self.smoothness, self.mu, self.gamma, self.fs_ws, self.dist0, self.f_star
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundName {
    CvxL1,
    CvxL2,
    StrCvxL1,
    StrCvxL2,
    GenGapL2,
    GenGapL1,
    CvxOpt,
    StrCvxOpt,
    CvxExcessShape,
    StrCvxExcessShape,
}

impl BoundName {
    /// Whether the value omits unknown universal constants and is only
    /// meaningful up to scale.
    pub fn shape_only(self) -> bool {
        matches!(self, BoundName::CvxExcessShape | BoundName::StrCvxExcessShape)
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundName::CvxL1 => "cvx_l1",
            BoundName::CvxL2 => "cvx_l2",
            BoundName::StrCvxL1 => "strcvx_l1",
            BoundName::StrCvxL2 => "strcvx_l2",
            BoundName::GenGapL2 => "gen_gap_l2",
            BoundName::GenGapL1 => "gen_gap_l1",
            BoundName::CvxOpt => "cvx_opt",
            BoundName::StrCvxOpt => "strcvx_opt",
            BoundName::CvxExcessShape => "cvx_excess_shape",
            BoundName::StrCvxExcessShape => "strcvx_excess_shape",
        };
        f.write_str(s)
    }
}

/// A bound value together with a record of what it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: BoundName,
    pub value: f64,
    pub inputs_digest: String,
}

impl BoundReport {
    pub fn new(name: BoundName, value: f64, inputs: &BoundInputs) -> Self {
        BoundReport { name, value, inputs_digest: inputs.digest() }
    }
}

/// Convex l1 stability bound:
/// `alpha sum_h sum_j 2 eta_{j,h} sqrt(2 L fs_v[j,h]) / n`.
pub fn cvx_l1_bound(inputs: &BoundInputs, outer: usize) -> Result<f64> {
    inputs.check_outer(outer)?;
    let l = inputs.smoothness;
    let mut sum = 0.0;
    for h in 0..outer {
        for j in 0..inputs.k {
            sum += 2.0 * inputs.eta[h][j] * (2.0 * l * inputs.fs_v[h][j]).sqrt();
        }
    }
    Ok(inputs.alpha * sum / inputs.nf())
}

/// Convex l2 stability bound:
/// `(16 a^2 L / (n b) + 16 a^2 L outer k / n^2) sum_h sum_j eta^2 fs_v`.
pub fn cvx_l2_bound(inputs: &BoundInputs, outer: usize) -> Result<f64> {
    inputs.check_outer(outer)?;
    let (a2, l, n) = (inputs.alpha * inputs.alpha, inputs.smoothness, inputs.nf());
    let coef = 16.0 * a2 * l / (n * inputs.bf()) + 16.0 * a2 * l * (outer * inputs.k) as f64 / (n * n);
    let mut sum = 0.0;
    for h in 0..outer {
        for j in 0..inputs.k {
            sum += inputs.eta[h][j].powi(2) * inputs.fs_v[h][j];
        }
    }
    Ok(coef * sum)
}

/// `prod_{j' > j} (1 - mu eta_{j',h} / 2)` within outer step `h`.
fn tail_product(inputs: &BoundInputs, h: usize, j: usize) -> f64 {
    inputs.eta[h][j + 1..inputs.k].iter().map(|e| 1.0 - inputs.mu * e / 2.0).product()
}

/// Strongly convex l1 stability bound.
pub fn strcvx_l1_bound(inputs: &BoundInputs, outer: usize) -> Result<f64> {
    inputs.check_outer(outer)?;
    inputs.require_mu()?;
    let a = inputs.alpha;
    let mut sum = 0.0;
    for h in 0..outer {
        let decay = (1.0 - a / 2.0).powi((outer - 1 - h) as i32);
        let mut inner = 0.0;
        for j in 0..inputs.k {
            inner += inputs.eta[h][j] * inputs.fs_v[h][j].sqrt() * tail_product(inputs, h, j);
        }
        sum += decay * inner;
    }
    Ok(2.0 * a * (2.0 * inputs.smoothness).sqrt() / inputs.nf() * sum)
}

/// How the per-step contraction product enters the strongly convex l2 bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProductForm {
    /// Each contraction factor squared (the tighter form).
    #[default]
    Squared,
    /// The weaker form the derivation ends with.
    Unsquared,
}

/// Strongly convex l2 stability bound.
pub fn strcvx_l2_bound(inputs: &BoundInputs, outer: usize, form: ProductForm) -> Result<f64> {
    inputs.check_outer(outer)?;
    inputs.require_mu()?;
    let (a2, n, mu) = (inputs.alpha * inputs.alpha, inputs.nf(), inputs.mu);
    let mut sum = 0.0;
    for h in 0..outer {
        for j in 0..inputs.k {
            let eta = inputs.eta[h][j];
            let coef = 16.0 * a2 * eta * eta / (n * inputs.bf()) + 32.0 * outer as f64 * a2 * eta / (n * n * mu);
            let p = tail_product(inputs, h, j);
            let p = match form {
                ProductForm::Squared => p * p,
                ProductForm::Unsquared => p,
            };
            sum += coef * inputs.fs_v[h][j] * p;
        }
    }
    Ok(sum)
}

/// Generalization gap from l2 stability:
/// `(L / gamma) risk + ((L + gamma) / 2) l2_avg`.
pub fn gen_gap_from_l2(smoothness: f64, gamma: f64, mean_emp_risk: f64, l2_avg: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Precondition(format!("gamma must be positive, got {gamma}")));
    }
    Ok(smoothness / gamma * mean_emp_risk + (smoothness + gamma) / 2.0 * l2_avg)
}

/// Generalization gap from l1 stability, with an empirical gradient-norm
/// ceiling in place of a Lipschitz constant.
pub fn gen_gap_from_l1(g_effective: f64, l1_avg: f64) -> f64 {
    g_effective * l1_avg
}

/// Largest `||grad f(w; z)||` over the given weights and every point of
/// `data`; the `g_effective` of [`gen_gap_from_l1`].
pub fn effective_lipschitz(model: &LossModel, weights: &[Weights], data: &Dataset) -> Result<f64> {
    let mut max: f64 = 0.0;
    for w in weights {
        for z in data.points() {
            max = max.max(model.loss_grad(w, z)?.norm());
        }
    }
    Ok(max)
}

/// Convex optimization error of the averaged fast iterate. Needs a constant
/// `eta < b / (L (b + 1))`.
pub fn cvx_opt_bound(inputs: &BoundInputs) -> Result<f64> {
    let eta = inputs.constant_eta()?;
    let (b, l) = (inputs.bf(), inputs.smoothness);
    let denom = b - l * eta * (b + 1.0);
    if denom <= 0.0 {
        return Err(Error::Precondition(format!("step size {eta} is not below b / (L (b + 1)) = {}", b / (l * (b + 1.0)))));
    }
    let r = (inputs.k * inputs.outer_steps) as f64;
    Ok(b * inputs.dist0 / (2.0 * inputs.alpha * eta * r * denom) + l * eta * inputs.fs_ws / denom)
}

/// `eta = b mu / (2 L^2 (b + 1))`, the step size of the strongly convex analysis.
pub fn strcvx_step_size(smoothness: f64, mu: f64, b: usize) -> f64 {
    let b = b as f64;
    b * mu / (2.0 * smoothness * smoothness * (b + 1.0))
}

fn require_strcvx_step(inputs: &BoundInputs) -> Result<f64> {
    inputs.require_mu()?;
    let eta = inputs.constant_eta()?;
    let want = strcvx_step_size(inputs.smoothness, inputs.mu, inputs.b);
    if (eta - want).abs() > 1e-12 * want {
        return Err(Error::Precondition(format!("step size must be b mu / (2 L^2 (b + 1)) = {want}, got {eta}")));
    }
    Ok(eta)
}

/// Strongly convex optimization error of `w_T`. Only defined at the step
/// size returned by [`strcvx_step_size`].
pub fn strcvx_opt_bound(inputs: &BoundInputs) -> Result<f64> {
    let eta = require_strcvx_step(inputs)?;
    let (a, l, mu, k) = (inputs.alpha, inputs.smoothness, inputs.mu, inputs.k as f64);
    let rate = 0.75 * a * k * mu * eta;
    let outer_sum: f64 = (0..inputs.outer_steps).map(|t| (-rate * t as f64).exp()).sum();
    let inner_sum: f64 = (0..inputs.k).map(|kk| (-0.75 * mu * eta * kk as f64).exp()).sum();
    Ok(l / 2.0 * (-rate * inputs.outer_steps as f64).exp() * inputs.dist0
        + l * a / 2.0 * outer_sum * inner_sum * (2.0 * eta * eta * l / inputs.bf()) * inputs.fs_ws)
}

/// Per-outer-step envelope of `E ||w_t - w_S||^2` at the strongly convex
/// step size: `rho^t dist0 + floor_t` with
/// `rho = 1 - alpha (1 - (1 - 1.5 mu eta)^k)` and
/// `floor_t = alpha sum_{t' < t} rho^t' sum_{k' < k} (1 - 1.5 mu eta)^k' 2 L eta^2 F_S(w_S) / b`.
/// Returns the pair `(rho^t dist0, floor_t)` for `t = 0..=T`.
pub fn strcvx_distance_envelope(inputs: &BoundInputs) -> Result<Vec<(f64, f64)>> {
    let eta = require_strcvx_step(inputs)?;
    let (a, l, mu) = (inputs.alpha, inputs.smoothness, inputs.mu);
    let q = 1.0 - 1.5 * mu * eta;
    let rho = 1.0 - a * (1.0 - q.powi(inputs.k as i32));
    let inner: f64 = (0..inputs.k).map(|kk| q.powi(kk as i32)).sum();
    let per_step = a * inner * 2.0 * l * eta * eta * inputs.fs_ws / inputs.bf();
    let mut out = Vec::with_capacity(inputs.outer_steps + 1);
    let mut geometric = 0.0;
    for t in 0..=inputs.outer_steps {
        out.push((rho.powi(t as i32) * inputs.dist0, per_step * geometric));
        geometric += rho.powi(t as i32);
    }
    Ok(out)
}

/// Which branch of the convex preset applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexRegime {
    /// `F(w*) >= 1/n`: step size and batch size scale together.
    Noisy,
    /// `F(w*) < 1/n`: constant step size, iteration count independent of `b`.
    LowNoise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexPreset {
    pub eta: f64,
    /// Total inner steps `R`.
    pub total_steps: usize,
    pub gamma: f64,
    pub regime: ConvexRegime,
    /// Whether `b <= sqrt(n F(w*)) / (2L)` (always true in the low-noise regime).
    pub valid: bool,
}

/// Step size, iteration budget and `gamma` for the convex excess-risk rate.
pub fn preset_convex(f_star: f64, n: usize, smoothness: f64, b: usize) -> Result<ConvexPreset> {
    if !(f_star >= 0.0) || n == 0 || b == 0 {
        return Err(Error::Config("convex preset needs f_star >= 0, n >= 1 and b >= 1".into()));
    }
    let nf = n as f64;
    if f_star >= 1.0 / nf {
        let root = (nf * f_star).sqrt();
        Ok(ConvexPreset {
            eta: b as f64 / root,
            total_steps: n.div_ceil(b),
            gamma: root,
            regime: ConvexRegime::Noisy,
            valid: b as f64 <= root / (2.0 * smoothness),
        })
    } else {
        Ok(ConvexPreset { eta: 1.0 / (2.0 * smoothness), total_steps: n, gamma: 1.0, regime: ConvexRegime::LowNoise, valid: true })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StronglyConvexPreset {
    pub eta: f64,
    pub k: usize,
    pub outer_steps: usize,
    /// Whether `alpha <= b mu / (2 ln2 (b + 1) L)`, which puts `eta` inside
    /// the strongly convex stability window.
    pub alpha_ok: bool,
    pub warnings: Vec<String>,
}

/// `eta = b mu / (2 L^2 (b + 1))`, `k = ceil(2L / (alpha mu))`,
/// `T = max(1, ceil(c_T ln(mu n)))`.
pub fn preset_strongly_convex(smoothness: f64, mu: f64, alpha: f64, b: usize, n: usize, c_t: f64) -> Result<StronglyConvexPreset> {
    if !(mu > 0.0) {
        return Err(Error::Config("strongly convex preset needs mu > 0".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if b == 0 || n == 0 || !(c_t > 0.0) {
        return Err(Error::Config("strongly convex preset needs b, n >= 1 and c_T > 0".into()));
    }
    let bf = b as f64;
    let eta = strcvx_step_size(smoothness, mu, b);
    let k = (2.0 * smoothness / (alpha * mu)).ceil() as usize;
    let mut warnings = Vec::new();
    let log = (mu * n as f64).ln();
    let outer_steps = if log <= 0.0 {
        warnings.push(format!("mu n = {} <= 1, using a single outer step", mu * n as f64));
        1
    } else {
        ((c_t * log).ceil() as usize).max(1)
    };
    let alpha_max = bf * mu / (2.0 * std::f64::consts::LN_2 * (bf + 1.0) * smoothness);
    let alpha_ok = alpha <= alpha_max;
    if !alpha_ok {
        warnings.push(format!("alpha {alpha} exceeds b mu / (2 ln2 (b + 1) L) = {alpha_max}; eta falls outside the stability window"));
    }
    Ok(StronglyConvexPreset { eta, k, outer_steps, alpha_ok, warnings })
}

/// Right-hand side of the convex excess-risk rate with all universal
/// constants set to one. Shape only.
pub fn cvx_excess_shape(inputs: &BoundInputs, total_steps: usize) -> Result<f64> {
    if !(inputs.gamma > 0.0) {
        return Err(Error::Precondition(format!("gamma must be positive, got {}", inputs.gamma)));
    }
    let eta = inputs.constant_eta()?;
    let (a, l, g, f, b, n) = (inputs.alpha, inputs.smoothness, inputs.gamma, inputs.f_star, inputs.bf(), inputs.nf());
    let r = total_steps as f64;
    let opt = 1.0 / (a * eta * r);
    Ok(l * eta * f / b
        + opt
        + (f + l * eta / b + opt) / g
        + l * (l + g) * a * a * eta * eta * (1.0 / (n * b) + r / (n * n)) * (r * f + r * l * eta / b + 1.0 / (a * eta)))
}

/// Right-hand side of the strongly convex excess-risk rate with all
/// universal constants set to one. Shape only.
pub fn strcvx_excess_shape(inputs: &BoundInputs) -> Result<f64> {
    inputs.require_mu()?;
    let (n, l) = (inputs.nf(), inputs.smoothness);
    Ok(1.0 / (n * inputs.mu) + (1.0 / (n * l) + 1.0) * inputs.fs_ws + (1.0 / (n * n) + l / n) * inputs.dist0)
}
