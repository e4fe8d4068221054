//! Synthetic convex loss families, their data generators and property checks.

pub mod checks;
mod data;
mod generator;
mod loss;
mod minimizer;

pub use data::{DataPoint, Dataset, Weights};
pub use generator::{generate_dataset, FeatureDist, GeneratorSpec};
pub use loss::{LossKind, LossModel};
pub use minimizer::{empirical_minimizer, LOGISTIC_GRAD_TOL, LOGISTIC_MAX_ITERS};
