use approx::assert_relative_eq;
use lookahead_stability::coupling::{coupled_run, estimate_stability, exhaustive_stability, make_neighbor, MonteCarloPlan, StabilityTarget};
use lookahead_stability::optimizer::{minibatch_sgd, LookaheadConfig};
use lookahead_stability::problems::{generate_dataset, GeneratorSpec, LossKind, Weights};
use proptest::prelude::*;

#[test]
fn exhaustive_matches_hand_expectation() {
    let spec = GeneratorSpec::ball(LossKind::LeastSquares, 2, 1.0, 0.5);
    let model = spec.model().unwrap();
    let data = generate_dataset(&spec, 4, 1).unwrap();
    let repl = generate_dataset(&spec, 4, 2).unwrap().points().to_vec();
    let (alpha, eta) = (0.5, 0.6);
    let est = exhaustive_stability(&LookaheadConfig::new(alpha, 1, 1, eta, 1, 0), &model, &data, &repl).unwrap();
    let w0 = Weights::zeros(2);
    let expected: f64 = data
        .points()
        .iter()
        .zip(&repl)
        .map(|(z, zp)| alpha * eta * (model.loss_grad(&w0, z).unwrap() - model.loss_grad(&w0, zp).unwrap()).norm() / 16.0)
        .sum();
    assert_relative_eq!(est.l1_mean, expected, max_relative = 1e-12);
    assert_eq!(est.samples, 16);
}

#[test]
fn unit_alpha_coupling_matches_sgd_coupling() {
    let spec = GeneratorSpec::ball(LossKind::LeastSquares, 3, 1.0, 0.5);
    let model = spec.model().unwrap();
    let data = generate_dataset(&spec, 16, 4).unwrap();
    let pair = make_neighbor(&data, 5, &spec, 8).unwrap();
    let run = coupled_run(&LookaheadConfig::new(1.0, 1, 30, 0.5, 2, 13), &model, &pair).unwrap();
    let etas = vec![0.5; 30];
    let a = minibatch_sgd(&model, &pair.original, &Weights::zeros(3), &etas, 2, 13).unwrap();
    let b = minibatch_sgd(&model, &pair.neighbor, &Weights::zeros(3), &etas, 2, 13).unwrap();
    let sgd: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).collect();
    assert_eq!(run.distances, sgd);
}

#[test]
fn averaged_target_is_supported() {
    let spec = GeneratorSpec::ball(LossKind::LeastSquares, 3, 1.0, 0.5);
    let plan = MonteCarloPlan { datasets: 2, indices_per_dataset: 4, seeds_per_index: 2, base_seed: 1, target: StabilityTarget::AveragedFast };
    let config = LookaheadConfig::new(0.5, 3, 5, 0.5, 1, 0);
    let averaged = estimate_stability(&config, &spec, 16, &plan).unwrap();
    let slow = estimate_stability(&config, &spec, 16, &MonteCarloPlan { target: StabilityTarget::FinalSlow, ..plan }).unwrap();
    assert!(averaged.l1_mean > 0.0);
    assert_ne!(averaged.l1_mean, slow.l1_mean);
}

#[test]
fn thread_count_does_not_change_estimates() {
    let spec = GeneratorSpec::ball(LossKind::Logistic, 3, 1.0, 0.0);
    let plan = MonteCarloPlan { base_seed: 5, ..MonteCarloPlan::default_for(20) };
    let config = LookaheadConfig::new(0.5, 2, 5, 1.0, 2, 0);
    let run = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| estimate_stability(&config, &spec, 20, &plan).unwrap());
    assert_eq!(run(1), run(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn jensen_consistency(alpha in 0.1f64..=1.0, b in 1usize..4, seed in any::<u64>()) {
        let spec = GeneratorSpec::ball(LossKind::LeastSquares, 3, 1.0, 0.5);
        let plan = MonteCarloPlan { datasets: 3, indices_per_dataset: 6, seeds_per_index: 2, base_seed: seed, target: StabilityTarget::FinalSlow };
        let est = estimate_stability(&LookaheadConfig::new(alpha, 3, 5, 0.5, b, 0), &spec, 12, &plan).unwrap();
        prop_assert!(est.l1_mean >= 0.0 && est.l2_mean >= 0.0);
        prop_assert!(est.jensen_consistent());
        prop_assert!(est.l1_mean * est.l1_mean <= est.l2_mean * (1.0 + 1e-12));
    }
}
