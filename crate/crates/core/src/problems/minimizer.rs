use nalgebra::{DMatrix, DVector};

use super::data::{Dataset, Weights};
use super::loss::{LossKind, LossModel};
use crate::error::{Error, Result};

/// Gradient-norm target of the logistic descent oracle.
pub const LOGISTIC_GRAD_TOL: f64 = 1e-10;
/// Iteration cap of the logistic descent oracle.
pub const LOGISTIC_MAX_ITERS: usize = 1_000_000;

/// Returns `(w_S, F_S(w_S))` with `w_S = argmin F_S`.
///
/// Least squares and ridge solve the normal equations; least squares fails
/// when the design Gram matrix is singular. Logistic runs full-batch gradient
/// descent with step `1/L` from the origin.
pub fn empirical_minimizer(model: &LossModel, data: &Dataset) -> Result<(Weights, f64)> {
    if data.dim() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: data.dim() });
    }
    let w = match model.kind() {
        LossKind::LeastSquares => solve_normal_equations(data, 0.0)?,
        LossKind::Ridge { lambda } => solve_normal_equations(data, lambda)?,
        LossKind::Logistic => logistic_descent(model, data)?,
    };
    let risk = model.empirical_risk(&w, data)?;
    Ok((w, risk))
}

fn solve_normal_equations(data: &Dataset, lambda: f64) -> Result<Weights> {
    let d = data.dim();
    let n = data.len() as f64;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for p in data.points() {
        gram.ger(1.0 / n, &p.x, &p.x, 1.0);
        rhs.axpy(p.y / n, &p.x, 1.0);
    }
    if lambda == 0.0 {
        let eig = gram.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if max <= 0.0 || min <= 1e-12 * max {
            return Err(Error::NoUniqueMinimizer(format!(
                "design Gram matrix is singular (eigenvalues in [{min:e}, {max:e}])"
            )));
        }
    }
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NoUniqueMinimizer("normal equations are not positive definite".into()))?;
    let mut w = chol.solve(&rhs);
    // One step of iterative refinement.
    let resid = &rhs - &gram * &w;
    w += chol.solve(&resid);
    Ok(w)
}

fn logistic_descent(model: &LossModel, data: &Dataset) -> Result<Weights> {
    let l = model.smoothness();
    if l <= 0.0 {
        return Err(Error::NoUniqueMinimizer("zero features: logistic risk is flat".into()));
    }
    let step = 1.0 / l;
    let mut w = DVector::zeros(model.dim());
    for _ in 0..LOGISTIC_MAX_ITERS {
        let g = model.empirical_grad_unchecked(&w, data);
        if g.norm() <= LOGISTIC_GRAD_TOL {
            return Ok(w);
        }
        w.axpy(-step, &g, 1.0);
    }
    let g = model.empirical_grad_unchecked(&w, data).norm();
    Err(Error::NoUniqueMinimizer(format!(
        "logistic descent did not reach gradient norm {LOGISTIC_GRAD_TOL:e} in {LOGISTIC_MAX_ITERS} iterations (last {g:e}); data may be separable"
    )))
}
