//! Randomised property checks for the loss families.
//!
//! Each check evaluates one inequality over a list of probes and reports the
//! worst observed ratio together with the number of violations. Nothing here
//! panics on a violation; callers decide what a failure means.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use super::data::{DataPoint, Dataset, Weights};
use super::generator::GeneratorSpec;
use super::loss::LossModel;
use crate::error::{Error, Result};
use crate::stats::rng_from_seed;

/// Absolute slack for the self-bounding inequality.
pub const SELF_BOUNDING_SLACK: f64 = 1e-9;
/// Relative tolerance of the finite-difference gradient check.
pub const GRADIENT_FD_TOL: f64 = 1e-6;

const REL_SLACK: f64 = 1e-12;

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + REL_SLACK * (1.0 + rhs.abs())
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub w: Weights,
    pub z: DataPoint,
}

#[derive(Debug, Clone)]
pub struct PairProbe {
    pub w1: Weights,
    pub w2: Weights,
    pub z: DataPoint,
}

fn random_weights(dim: usize, scale: f64, rng: &mut crate::stats::Rng) -> Weights {
    DVector::from_fn(dim, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        scale * g
    })
}

/// `count` probes with `w ~ N(0, scale^2 I)` and `z` from the generator.
pub fn random_probes(spec: &GeneratorSpec, count: usize, scale: f64, seed: u64) -> Vec<Probe> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| Probe { w: random_weights(spec.dim, scale, &mut rng), z: spec.draw_point(&mut rng) })
        .collect()
}

pub fn random_pair_probes(spec: &GeneratorSpec, count: usize, scale: f64, seed: u64) -> Vec<PairProbe> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| PairProbe {
            w1: random_weights(spec.dim, scale, &mut rng),
            w2: random_weights(spec.dim, scale, &mut rng),
            z: spec.draw_point(&mut rng),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfBoundingReport {
    pub probes: usize,
    /// Largest `|grad f|^2 / (2 L f)` observed (0 when every gradient vanished).
    pub max_ratio: f64,
    pub violations: usize,
}

impl SelfBoundingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `|grad f(w;z)|^2 <= 2 L f(w;z)` up to [`SELF_BOUNDING_SLACK`].
pub fn check_self_bounding(model: &LossModel, probes: &[Probe]) -> Result<SelfBoundingReport> {
    let two_l = 2.0 * model.smoothness();
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for p in probes {
        let f = model.loss_value(&p.w, &p.z)?;
        let g2 = model.loss_grad(&p.w, &p.z)?.norm_squared();
        let bound = two_l * f;
        if g2 > bound + SELF_BOUNDING_SLACK {
            violations += 1;
        }
        let ratio = if bound > 0.0 {
            g2 / bound
        } else if g2 > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        max_ratio = max_ratio.max(ratio);
    }
    Ok(SelfBoundingReport { probes: probes.len(), max_ratio, violations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMapReport {
    pub probes: usize,
    pub eta: f64,
    /// Largest `|G(w1) - G(w2)| / |w1 - w2|` for `G(w) = w - eta grad f(w;z)`.
    pub max_expansion: f64,
    pub nonexpansive_violations: usize,
    /// Whether the strongly convex contraction checks ran (`mu > 0`, `eta <= 1/L`).
    pub contraction_checked: bool,
    pub contraction_violations: usize,
    pub squared_contraction_violations: usize,
    pub cocoercivity_violations: usize,
}

impl GradientMapReport {
    pub fn passed(&self) -> bool {
        self.nonexpansive_violations == 0
            && self.contraction_violations == 0
            && self.squared_contraction_violations == 0
            && self.cocoercivity_violations == 0
    }
}

/// Checks non-expansiveness of the gradient step (needs `eta <= 2/L`),
/// the strongly convex contraction factors `1 - eta mu / 2` and `1 - eta mu`
/// (when `mu > 0` and `eta <= 1/L`), and per-example cocoercivity
/// `|grad f(w1) - grad f(w2)|^2 <= L <grad f(w1) - grad f(w2), w1 - w2>`.
pub fn check_gradient_maps(model: &LossModel, eta: f64, probes: &[PairProbe]) -> Result<GradientMapReport> {
    let l = model.smoothness();
    let mu = model.strong_convexity();
    if !(eta > 0.0 && eta <= 2.0 / l) {
        return Err(Error::Precondition(format!("step {eta} must lie in (0, 2/L = {}]", 2.0 / l)));
    }
    let contraction_checked = mu > 0.0 && eta <= 1.0 / l;
    let mut report = GradientMapReport {
        probes: probes.len(),
        eta,
        max_expansion: 0.0,
        nonexpansive_violations: 0,
        contraction_checked,
        contraction_violations: 0,
        squared_contraction_violations: 0,
        cocoercivity_violations: 0,
    };
    for p in probes {
        let g1 = model.loss_grad(&p.w1, &p.z)?;
        let g2 = model.loss_grad(&p.w2, &p.z)?;
        let dw = &p.w1 - &p.w2;
        let dg = &g1 - &g2;
        let mapped = &dw - &dg * eta;
        let (dist, mdist) = (dw.norm(), mapped.norm());
        if dist > 0.0 {
            report.max_expansion = report.max_expansion.max(mdist / dist);
        }
        if !within(mdist, dist) {
            report.nonexpansive_violations += 1;
        }
        if contraction_checked {
            if !within(mdist, (1.0 - eta * mu / 2.0) * dist) {
                report.contraction_violations += 1;
            }
            if !within(mdist * mdist, (1.0 - eta * mu) * dist * dist) {
                report.squared_contraction_violations += 1;
            }
        }
        if !within(dg.norm_squared(), l * dg.dot(&dw)) {
            report.cocoercivity_violations += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub probes: usize,
    pub violations: usize,
    /// Worst `lhs / rhs` observed where `rhs > 0`.
    pub max_ratio: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn push(&mut self, lhs: f64, rhs: f64) {
        self.probes += 1;
        if !within(lhs, rhs) {
            self.violations += 1;
        }
        if rhs > 0.0 {
            self.max_ratio = self.max_ratio.max(lhs / rhs);
        }
    }

    fn new() -> Self {
        InequalityReport { probes: 0, violations: 0, max_ratio: 0.0 }
    }
}

/// Analytic gradient against central differences with step `h`.
/// `max_ratio` holds the worst relative error `|g - g_fd| / max(|g|, |g_fd|, 1e-3)`.
pub fn check_gradient_fd(model: &LossModel, probes: &[Probe], h: f64) -> Result<InequalityReport> {
    let mut report = InequalityReport::new();
    for p in probes {
        let g = model.loss_grad(&p.w, &p.z)?;
        let mut fd = DVector::zeros(model.dim());
        for j in 0..model.dim() {
            let mut wp = p.w.clone();
            let mut wm = p.w.clone();
            wp[j] += h;
            wm[j] -= h;
            fd[j] = (model.loss_value(&wp, &p.z)? - model.loss_value(&wm, &p.z)?) / (2.0 * h);
        }
        let rel = (&g - &fd).norm() / g.norm().max(fd.norm()).max(1e-3);
        report.probes += 1;
        if rel > GRADIENT_FD_TOL {
            report.violations += 1;
        }
        report.max_ratio = report.max_ratio.max(rel);
    }
    Ok(report)
}

/// `|grad f(w1;z) - grad f(w2;z)| <= L |w1 - w2|`
pub fn check_smoothness(model: &LossModel, probes: &[PairProbe]) -> Result<InequalityReport> {
    let mut report = InequalityReport::new();
    for p in probes {
        let dg = model.loss_grad(&p.w1, &p.z)? - model.loss_grad(&p.w2, &p.z)?;
        report.push(dg.norm(), model.smoothness() * (&p.w1 - &p.w2).norm());
    }
    Ok(report)
}

/// `f(w1) >= f(w2) + <grad f(w2), w1 - w2> + (mu/2)|w1 - w2|^2`, written as
/// `lhs <= rhs` with `lhs = f(w2) + ... ` and `rhs = f(w1)`.
pub fn check_strong_convexity(model: &LossModel, probes: &[PairProbe]) -> Result<InequalityReport> {
    let mu = model.strong_convexity();
    let mut report = InequalityReport::new();
    for p in probes {
        let dw = &p.w1 - &p.w2;
        let lower = model.loss_value(&p.w2, &p.z)?
            + model.loss_grad(&p.w2, &p.z)?.dot(&dw)
            + 0.5 * mu * dw.norm_squared();
        report.push(lower, model.loss_value(&p.w1, &p.z)?);
    }
    Ok(report)
}

/// Cocoercivity of the empirical gradient `grad F_S` at the given pairs.
pub fn check_empirical_cocoercivity(
    model: &LossModel,
    data: &Dataset,
    pairs: &[(Weights, Weights)],
) -> Result<InequalityReport> {
    let mut report = InequalityReport::new();
    for (w1, w2) in pairs {
        let dg = model.empirical_grad(w1, data)? - model.empirical_grad(w2, data)?;
        report.push(dg.norm_squared(), model.smoothness() * dg.dot(&(w1 - w2)));
    }
    Ok(report)
}

/// Minimum loss value over the probes (nonnegativity check).
pub fn min_loss_value(model: &LossModel, probes: &[Probe]) -> Result<f64> {
    probes
        .iter()
        .map(|p| model.loss_value(&p.w, &p.z))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}

/// Full battery used by the `check-props` command and the acceptance suite.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub model: LossModel,
    pub min_loss: f64,
    pub self_bounding: SelfBoundingReport,
    pub gradient_maps: GradientMapReport,
    pub gradient_fd: InequalityReport,
    pub smoothness: InequalityReport,
    pub strong_convexity: Option<InequalityReport>,
    pub empirical_cocoercivity: InequalityReport,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.min_loss >= 0.0
            && self.self_bounding.passed()
            && self.gradient_maps.passed()
            && self.gradient_fd.passed()
            && self.smoothness.passed()
            && self.strong_convexity.as_ref().is_none_or(InequalityReport::passed)
            && self.empirical_cocoercivity.passed()
    }
}

/// Runs every property check on `probes` random probes per check, with the
/// gradient-map step `eta` (defaults to `1/L`).
pub fn run_property_suite(spec: &GeneratorSpec, probes: usize, eta: Option<f64>, seed: u64) -> Result<PropertyReport> {
    let model = spec.model()?;
    let scale = 2.0;
    let singles = random_probes(spec, probes, scale, seed);
    let pairs = random_pair_probes(spec, probes, scale, seed ^ 0x5151);
    let eta = eta.unwrap_or(1.0 / model.smoothness());
    let data = super::generator::generate_dataset(spec, 32, seed ^ 0xDA7A)?;
    let weight_pairs: Vec<_> = pairs.iter().map(|p| (p.w1.clone(), p.w2.clone())).collect();
    Ok(PropertyReport {
        model,
        min_loss: min_loss_value(&model, &singles)?,
        self_bounding: check_self_bounding(&model, &singles)?,
        gradient_maps: check_gradient_maps(&model, eta, &pairs)?,
        gradient_fd: check_gradient_fd(&model, &singles, 1e-5)?,
        smoothness: check_smoothness(&model, &pairs)?,
        strong_convexity: (model.strong_convexity() > 0.0)
            .then(|| check_strong_convexity(&model, &pairs))
            .transpose()?,
        empirical_cocoercivity: check_empirical_cocoercivity(&model, &data, &weight_pairs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::LossKind;
    use approx::assert_relative_eq;

    #[test]
    fn self_bounding_tight_case() {
        let m = LossModel::new(LossKind::LeastSquares, 1, 1.0).unwrap();
        let probe = Probe { w: DVector::from_element(1, 1.0), z: DataPoint::new(vec![1.0], 0.0) };
        let r = check_self_bounding(&m, &[probe]).unwrap();
        assert!(r.passed());
        assert_relative_eq!(r.max_ratio, 1.0);
    }

    #[test]
    fn zero_loss_implies_zero_gradient() {
        let m = LossModel::new(LossKind::LeastSquares, 2, 1.0).unwrap();
        let probe = Probe { w: DVector::from_vec(vec![1.0, 0.0]), z: DataPoint::new(vec![0.5, 0.5], 0.5) };
        assert_eq!(m.loss_value(&probe.w, &probe.z).unwrap(), 0.0);
        let r = check_self_bounding(&m, &[probe]).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn identical_weights_map_to_identical_points() {
        let m = LossModel::new(LossKind::Ridge { lambda: 1.0 }, 1, 1.0).unwrap();
        let w = DVector::from_element(1, 0.3);
        let p = PairProbe { w1: w.clone(), w2: w, z: DataPoint::new(vec![0.7], 0.1) };
        let r = check_gradient_maps(&m, 0.5, &[p]).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_expansion, 0.0);
    }

    #[test]
    fn ridge_pure_quadratic_contraction() {
        let m = LossModel::new(LossKind::Ridge { lambda: 1.0 }, 1, 1.0).unwrap();
        let p = PairProbe {
            w1: DVector::from_element(1, 1.0),
            w2: DVector::from_element(1, 0.0),
            z: DataPoint::new(vec![0.0], 0.0),
        };
        let r = check_gradient_maps(&m, 0.5, &[p]).unwrap();
        assert!(r.contraction_checked);
        assert!(r.passed());
        // The map is w -> (1 - eta lambda) w, so the distance halves.
        assert_relative_eq!(r.max_expansion, 0.5);
    }

    #[test]
    fn step_above_two_over_l_is_rejected() {
        let m = LossModel::new(LossKind::LeastSquares, 1, 1.0).unwrap();
        assert!(matches!(check_gradient_maps(&m, 2.5, &[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn random_least_squares_probes_at_inverse_l() {
        let spec = GeneratorSpec::ball(LossKind::LeastSquares, 4, 1.0, 0.5);
        let m = spec.model().unwrap();
        let r = check_gradient_maps(&m, 1.0 / m.smoothness(), &random_pair_probes(&spec, 1000, 2.0, 1)).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn logistic_self_bounding_ratios_stay_below_one() {
        let spec = GeneratorSpec::ball(LossKind::Logistic, 3, 2.0, 0.0);
        let r = check_self_bounding(&spec.model().unwrap(), &random_probes(&spec, 1000, 3.0, 2)).unwrap();
        assert!(r.passed());
        assert!(r.max_ratio <= 1.0);
    }

    #[test]
    fn a_wrong_smoothness_constant_is_caught() {
        // Features of norm 2 but a model that claims B_x = 1.
        let spec = GeneratorSpec::ball(LossKind::LeastSquares, 2, 2.0, 0.1);
        let wrong = LossModel::new(LossKind::LeastSquares, 2, 1.0).unwrap();
        let r = check_smoothness(&wrong, &random_pair_probes(&spec, 500, 1.0, 3)).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn full_suite_passes_for_every_family() {
        for kind in [LossKind::LeastSquares, LossKind::Ridge { lambda: 0.5 }, LossKind::Logistic] {
            let spec = GeneratorSpec::ball(kind, 3, 1.0, 0.5);
            let r = run_property_suite(&spec, 200, None, 9).unwrap();
            assert!(r.passed(), "{kind:?}: {r:?}");
            assert_eq!(r.strong_convexity.is_some(), matches!(kind, LossKind::Ridge { .. }));
        }
    }
}
