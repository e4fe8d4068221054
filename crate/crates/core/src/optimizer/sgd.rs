use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problems::{Dataset, LossModel, Weights};

use super::sampling::{IndexSource, RngIndices};

/// Outcome of one inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRun {
    /// `v_k`
    pub end: Weights,
    /// `v_0, ..., v_k` when recorded.
    pub iterates: Vec<Weights>,
    /// `F_S(v_tau)` for `tau = 0..k` (exclusive) when recorded.
    pub risks: Vec<f64>,
    /// Minibatch used at each inner step.
    pub batches: Vec<Vec<usize>>,
}

fn check_inputs(model: &LossModel, data: &Dataset, v0: &Weights) -> Result<()> {
    if data.dim() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: data.dim() });
    }
    if v0.len() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: v0.len() });
    }
    Ok(())
}

/// `v - (eta / b) * sum_{j in batch} grad f(v; z_j)`
fn sgd_step(model: &LossModel, data: &Dataset, v: &Weights, eta: f64, batch: &[usize]) -> Weights {
    let mut g = DVector::zeros(v.len());
    for &j in batch {
        model.add_grad_unchecked(v, &data.points()[j], 1.0, &mut g);
    }
    v - g * (eta / batch.len() as f64)
}

/// Runs `steps.len()` minibatch SGD steps from `v0`, drawing batches of size
/// `b` from `indices`.
pub fn sgd_inner(
    model: &LossModel,
    data: &Dataset,
    v0: &Weights,
    steps: &[f64],
    b: usize,
    indices: &mut dyn IndexSource,
    record: bool,
) -> Result<InnerRun> {
    check_inputs(model, data, v0)?;
    let mut v = v0.clone();
    let mut iterates = Vec::new();
    let mut risks = Vec::new();
    let mut batches = Vec::with_capacity(steps.len());
    for &eta in steps {
        let batch = indices.next_batch(data.len(), b)?;
        if record {
            risks.push(model.empirical_risk_unchecked(&v, data));
            iterates.push(v.clone());
        }
        v = sgd_step(model, data, &v, eta, &batch);
        batches.push(batch);
    }
    if record {
        iterates.push(v.clone());
    }
    Ok(InnerRun { end: v, iterates, risks, batches })
}

/// Plain minibatch SGD for `etas.len()` steps, returning `w_0, ..., w_R`.
///
/// Indices come from the same seeded stream as [`lookahead_run`](super::lookahead_run)
/// uses, so the two can be compared step by step.
pub fn minibatch_sgd(
    model: &LossModel,
    data: &Dataset,
    w0: &Weights,
    etas: &[f64],
    b: usize,
    seed: u64,
) -> Result<Vec<Weights>> {
    check_inputs(model, data, w0)?;
    let mut source = RngIndices::new(seed);
    let mut path = vec![w0.clone()];
    let mut w = w0.clone();
    for &eta in etas {
        let batch = source.next_batch(data.len(), b)?;
        w = sgd_step(model, data, &w, eta, &batch);
        path.push(w.clone());
    }
    Ok(path)
}
