//! Synthetic data distributions with exactly known constants.
//!
//! Features are drawn uniformly from the Euclidean ball of radius `B_x` (or
//! from a point mass), so the worst-case smoothness constant advertised by the
//! [`LossModel`] holds for every example the generator can produce. Labels for
//! the regression families are `<w_true, x> + e` with `e` a centred Gaussian
//! truncated at `label_clip` standard deviations, which keeps `|y|` bounded.
//! Logistic labels are `+1` with probability `sigmoid(<w_true, x>)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::{DataPoint, Dataset, Weights};
use super::loss::{LossKind, LossModel};
use crate::error::{Error, Result};
use crate::stats::{rng_from_seed, Rng};

/// Feature distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "features", rename_all = "snake_case")]
pub enum FeatureDist {
    /// Uniform on the ball `{x : |x| <= radius}`.
    Ball { radius: f64 },
    /// Every draw equals `x`.
    Point { x: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: LossKind,
    pub dim: usize,
    pub features: FeatureDist,
    /// Label noise standard deviation before truncation.
    pub noise: f64,
    /// Truncation point of the label noise, in units of `noise`.
    pub label_clip: f64,
    pub w_true: Vec<f64>,
}

impl GeneratorSpec {
    /// Uniform-ball generator with `w_true = (1, ..., 1) / sqrt(d)`.
    pub fn ball(kind: LossKind, dim: usize, radius: f64, noise: f64) -> Self {
        let c = 1.0 / (dim.max(1) as f64).sqrt();
        GeneratorSpec {
            kind,
            dim,
            features: FeatureDist::Ball { radius },
            noise,
            label_clip: 5.0,
            w_true: vec![c; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("label noise must be >= 0, got {}", self.noise)));
        }
        if !(self.label_clip.is_finite() && self.label_clip > 0.0) {
            return Err(Error::Config(format!("label_clip must be > 0, got {}", self.label_clip)));
        }
        if self.w_true.len() != self.dim {
            return Err(Error::Config(format!(
                "w_true has {} entries, dim is {}",
                self.w_true.len(),
                self.dim
            )));
        }
        match &self.features {
            FeatureDist::Ball { radius } if !(radius.is_finite() && *radius >= 0.0) => {
                return Err(Error::Config(format!("feature radius must be >= 0, got {radius}")))
            }
            FeatureDist::Point { x } if x.len() != self.dim => {
                return Err(Error::Config(format!("point feature has {} entries, dim is {}", x.len(), self.dim)))
            }
            _ => {}
        }
        // Builds the model to validate kind-specific parameters.
        LossModel::new(self.kind, self.dim, self.feature_bound())?;
        Ok(())
    }

    /// `B_x`, the bound on `|x|`.
    pub fn feature_bound(&self) -> f64 {
        match &self.features {
            FeatureDist::Ball { radius } => *radius,
            FeatureDist::Point { x } => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// `B_y`, the bound on `|y|`.
    pub fn label_bound(&self) -> f64 {
        match self.kind {
            LossKind::Logistic => 1.0,
            _ => {
                let wn = self.w_true.iter().map(|v| v * v).sum::<f64>().sqrt();
                wn * self.feature_bound() + self.label_clip * self.noise
            }
        }
    }

    pub fn model(&self) -> Result<LossModel> {
        self.validate()?;
        LossModel::new(self.kind, self.dim, self.feature_bound())
    }

    fn w_true_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.w_true)
    }

    fn draw_features(&self, rng: &mut Rng) -> DVector<f64> {
        match &self.features {
            FeatureDist::Point { x } => DVector::from_column_slice(x),
            FeatureDist::Ball { radius } => {
                let g: DVector<f64> = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
                let norm = g.norm();
                if norm == 0.0 {
                    return DVector::zeros(self.dim);
                }
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / self.dim as f64);
                let mut x = g * (r / norm);
                let xn = x.norm();
                if xn > *radius {
                    x *= radius / xn;
                }
                x
            }
        }
    }

    fn draw_noise(&self, rng: &mut Rng) -> f64 {
        if self.noise == 0.0 {
            return 0.0;
        }
        loop {
            let e: f64 = StandardNormal.sample(rng);
            if e.abs() <= self.label_clip {
                return self.noise * e;
            }
        }
    }

    /// One draw from the data distribution.
    pub fn draw_point(&self, rng: &mut Rng) -> DataPoint {
        let x = self.draw_features(rng);
        let margin = x.dot(&self.w_true_vec());
        let y = match self.kind {
            LossKind::Logistic => {
                let p = 1.0 / (1.0 + (-margin).exp());
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => margin + self.draw_noise(rng),
        };
        DataPoint { x, y }
    }

    /// `E[x x^T]` of the feature distribution.
    pub fn second_moment(&self) -> DMatrix<f64> {
        match &self.features {
            FeatureDist::Ball { radius } => {
                DMatrix::identity(self.dim, self.dim) * (radius * radius / (self.dim as f64 + 2.0))
            }
            FeatureDist::Point { x } => {
                let v = DVector::from_column_slice(x);
                &v * v.transpose()
            }
        }
    }

    /// Variance of the truncated label noise.
    pub fn noise_variance(&self) -> f64 {
        if self.noise == 0.0 {
            return 0.0;
        }
        let c = self.label_clip;
        let pdf = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mass = statrs::function::erf::erf(c / std::f64::consts::SQRT_2);
        self.noise * self.noise * (1.0 - 2.0 * c * pdf / mass)
    }

    /// Closed-form population risk `F(w)` for the regression families.
    pub fn population_risk(&self, w: &Weights) -> Option<f64> {
        let lambda = match self.kind {
            LossKind::LeastSquares => 0.0,
            LossKind::Ridge { lambda } => lambda,
            LossKind::Logistic => return None,
        };
        let diff = w - self.w_true_vec();
        let quad = diff.dot(&(self.second_moment() * &diff));
        Some(0.5 * quad + 0.5 * self.noise_variance() + 0.5 * lambda * w.norm_squared())
    }

    /// Population minimizer `w*`.
    ///
    /// Least squares and logistic are well specified, so `w* = w_true`; ridge
    /// solves `(Sigma + lambda I) w = Sigma w_true`.
    pub fn population_minimizer(&self) -> Weights {
        let wt = self.w_true_vec();
        match self.kind {
            LossKind::LeastSquares | LossKind::Logistic => wt,
            LossKind::Ridge { lambda } => {
                let sigma = self.second_moment();
                let a = &sigma + DMatrix::identity(self.dim, self.dim) * lambda;
                let rhs = sigma * wt;
                a.cholesky().expect("ridge system is positive definite").solve(&rhs)
            }
        }
    }

    /// Optimal population risk `F(w*)`: exact for the regression families,
    /// a Monte Carlo estimate on `samples` fresh points for logistic.
    pub fn optimal_risk(&self, samples: usize, seed: u64) -> Result<f64> {
        let w_star = self.population_minimizer();
        if let Some(v) = self.population_risk(&w_star) {
            return Ok(v);
        }
        let model = self.model()?;
        let heldout = generate_dataset(self, samples, seed)?;
        model.empirical_risk(&w_star, &heldout)
    }
}

/// Draws `n` i.i.d. points; deterministic in `(spec, n, seed)`.
pub fn generate_dataset(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let points = (0..n).map(|_| spec.draw_point(&mut rng)).collect();
    Dataset::new(points)
}
