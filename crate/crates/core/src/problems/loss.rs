use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::data::{DataPoint, Dataset, Weights};
use crate::error::{Error, Result};

/// Loss family. Logistic labels are encoded in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum LossKind {
    LeastSquares,
    Ridge { lambda: f64 },
    Logistic,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::LeastSquares => "least_squares",
            LossKind::Ridge { .. } => "ridge",
            LossKind::Logistic => "logistic",
        }
    }
}

/// A loss family together with its worst-case constants over the generator
/// support: smoothness `L` and strong convexity `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    smoothness: f64,
    strong_convexity: f64,
    dim: usize,
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LossModel {
    /// Builds the model for features bounded by `feature_bound` in Euclidean
    /// norm: `L = B^2` (least squares), `B^2 + lambda` (ridge), `B^2 / 4`
    /// (logistic).
    pub fn new(kind: LossKind, dim: usize, feature_bound: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if !(feature_bound.is_finite() && feature_bound >= 0.0) {
            return Err(Error::Config(format!("invalid feature bound {feature_bound}")));
        }
        let b2 = feature_bound * feature_bound;
        let (smoothness, strong_convexity) = match kind {
            LossKind::LeastSquares => (b2, 0.0),
            LossKind::Ridge { lambda } => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    return Err(Error::Config(format!("ridge lambda must be positive, got {lambda}")));
                }
                (b2 + lambda, lambda)
            }
            LossKind::Logistic => (b2 / 4.0, 0.0),
        };
        Ok(LossModel { kind, smoothness, strong_convexity, dim })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Smoothness constant `L`.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Strong convexity constant `mu` (zero for the convex families).
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dims(&self, w: &Weights, z: &DataPoint) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: w.len() });
        }
        if z.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: z.dim() });
        }
        Ok(())
    }

    /// `f(w; z)`
    pub fn loss_value(&self, w: &Weights, z: &DataPoint) -> Result<f64> {
        self.check_dims(w, z)?;
        Ok(self.value_unchecked(w, z))
    }

    /// `grad f(w; z)`
    pub fn loss_grad(&self, w: &Weights, z: &DataPoint) -> Result<Weights> {
        self.check_dims(w, z)?;
        let mut g = DVector::zeros(self.dim);
        self.add_grad_unchecked(w, z, 1.0, &mut g);
        Ok(g)
    }

    pub(crate) fn value_unchecked(&self, w: &Weights, z: &DataPoint) -> f64 {
        let margin = w.dot(&z.x);
        match self.kind {
            LossKind::LeastSquares => 0.5 * (margin - z.y).powi(2),
            LossKind::Ridge { lambda } => 0.5 * (margin - z.y).powi(2) + 0.5 * lambda * w.norm_squared(),
            LossKind::Logistic => log1p_exp(-z.y * margin),
        }
    }

    /// `out += scale * grad f(w; z)`
    pub(crate) fn add_grad_unchecked(&self, w: &Weights, z: &DataPoint, scale: f64, out: &mut Weights) {
        let margin = w.dot(&z.x);
        match self.kind {
            LossKind::LeastSquares => out.axpy(scale * (margin - z.y), &z.x, 1.0),
            LossKind::Ridge { lambda } => {
                out.axpy(scale * (margin - z.y), &z.x, 1.0);
                out.axpy(scale * lambda, w, 1.0);
            }
            LossKind::Logistic => {
                let coef = -z.y * sigmoid(-z.y * margin);
                out.axpy(scale * coef, &z.x, 1.0);
            }
        }
    }

    fn check_dataset(&self, w: &Weights, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.check_dims(w, &data.points()[0])
    }

    /// `F_S(w)`, the mean loss over the sample.
    pub fn empirical_risk(&self, w: &Weights, data: &Dataset) -> Result<f64> {
        self.check_dataset(w, data)?;
        Ok(self.empirical_risk_unchecked(w, data))
    }

    pub(crate) fn empirical_risk_unchecked(&self, w: &Weights, data: &Dataset) -> f64 {
        let total: f64 = data.points().iter().map(|z| self.value_unchecked(w, z)).sum();
        total / data.len() as f64
    }

    /// `grad F_S(w)`
    pub fn empirical_grad(&self, w: &Weights, data: &Dataset) -> Result<Weights> {
        self.check_dataset(w, data)?;
        Ok(self.empirical_grad_unchecked(w, data))
    }

    pub(crate) fn empirical_grad_unchecked(&self, w: &Weights, data: &Dataset) -> Weights {
        let mut g = DVector::zeros(self.dim);
        let scale = 1.0 / data.len() as f64;
        for z in data.points() {
            self.add_grad_unchecked(w, z, scale, &mut g);
        }
        g
    }
}
