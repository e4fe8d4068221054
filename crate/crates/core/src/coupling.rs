//! Coupled runs on neighbouring datasets and Monte Carlo estimates of
//! on-average model stability.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::csv::fmt_f64;
use crate::optimizer::{averaged_iterate, lookahead_run, lookahead_run_with, LookaheadConfig, RecordLevel, ScriptedIndices, Trajectory};
use crate::problems::{generate_dataset, DataPoint, Dataset, GeneratorSpec, LossModel};
use crate::stats::{combined_se, rng_from_seed, MeanSe};

/// `S` together with `S^(i)`, the copy whose `i`-th point is replaced by `z'`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPair {
    pub original: Dataset,
    pub index: usize,
    pub replacement: DataPoint,
    pub neighbor: Dataset,
}

impl NeighborPair {
    pub fn new(original: Dataset, index: usize, replacement: DataPoint) -> Result<Self> {
        let neighbor = original.with_replaced(index, replacement.clone())?;
        Ok(NeighborPair { original, index, replacement, neighbor })
    }
}

/// Draws `z'` from `spec` with `seed` and builds the neighbour of `data` at `index`.
pub fn make_neighbor(data: &Dataset, index: usize, spec: &GeneratorSpec, seed: u64) -> Result<NeighborPair> {
    data.get(index)?;
    let z = spec.draw_point(&mut rng_from_seed(seed));
    NeighborPair::new(data.clone(), index, z)
}

/// Both trajectories of a coupled run and the slow-weight distances between them.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub original: Trajectory,
    pub neighbor: Trajectory,
    /// `||w_t - w_t^(i)||` for `t = 0..=T`.
    pub distances: Vec<f64>,
    pub squared_distances: Vec<f64>,
}

/// Runs Lookahead on `S` and `S^(i)` with the same seed, hence the same
/// minibatch index sequence.
pub fn coupled_run(config: &LookaheadConfig, model: &LossModel, pair: &NeighborPair) -> Result<CoupledRun> {
    let original = lookahead_run(config, model, &pair.original)?;
    let neighbor = lookahead_run(config, model, &pair.neighbor)?;
    Ok(couple(original, neighbor))
}

fn couple(original: Trajectory, neighbor: Trajectory) -> CoupledRun {
    let squared_distances: Vec<f64> =
        original.slow.iter().zip(&neighbor.slow).map(|(a, b)| (a - b).norm_squared()).collect();
    let distances = squared_distances.iter().map(|d| d.sqrt()).collect();
    CoupledRun { original, neighbor, distances, squared_distances }
}

/// Which output of the algorithm stability is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityTarget {
    /// `w_T`
    #[default]
    FinalSlow,
    /// The average of all fast iterates.
    AveragedFast,
}

fn target_distance(target: StabilityTarget, run: &CoupledRun) -> Result<f64> {
    match target {
        StabilityTarget::FinalSlow => Ok(*run.squared_distances.last().expect("nonempty")),
        StabilityTarget::AveragedFast => {
            Ok((averaged_iterate(&run.original)? - averaged_iterate(&run.neighbor)?).norm_squared())
        }
    }
}

/// Monte Carlo sample counts for [`estimate_stability`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloPlan {
    pub datasets: usize,
    /// Replaced indices per dataset; all `n` are used when this is at least `n`.
    pub indices_per_dataset: usize,
    pub seeds_per_index: usize,
    pub base_seed: u64,
    pub target: StabilityTarget,
}

impl MonteCarloPlan {
    /// 8 datasets, `min(n, 16)` indices and 4 algorithm seeds.
    pub fn default_for(n: usize) -> Self {
        MonteCarloPlan { datasets: 8, indices_per_dataset: n.min(16), seeds_per_index: 4, base_seed: 0, target: StabilityTarget::FinalSlow }
    }

    pub fn samples(&self, n: usize) -> usize {
        self.datasets * self.indices_per_dataset.min(n) * self.seeds_per_index
    }
}

/// Seeds of the independent random sources, all derived from one base seed
/// so that configurations sharing a plan see the same datasets, replacements
/// and index streams.
pub mod seeds {
    use crate::stats::derive_seed;

    const DATASET: u64 = 1;
    const INDICES: u64 = 2;
    const REPLACEMENT: u64 = 3;
    const ALGORITHM: u64 = 4;

    pub fn dataset(base: u64, d: usize) -> u64 {
        derive_seed(base, &[DATASET, d as u64])
    }

    pub fn index_choice(base: u64, d: usize) -> u64 {
        derive_seed(base, &[INDICES, d as u64])
    }

    pub fn replacement(base: u64, d: usize, i: usize, s: usize) -> u64 {
        derive_seed(base, &[REPLACEMENT, d as u64, i as u64, s as u64])
    }

    pub fn algorithm(base: u64, d: usize, i: usize, s: usize) -> u64 {
        derive_seed(base, &[ALGORITHM, d as u64, i as u64, s as u64])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityEstimate {
    /// Estimate of `(1/n) sum_i E ||A(S) - A(S^(i))||`.
    pub l1_mean: f64,
    /// Estimate of `(1/n) sum_i E ||A(S) - A(S^(i))||^2`.
    pub l2_mean: f64,
    pub std_error_l1: f64,
    pub std_error_l2: f64,
    pub samples: usize,
    /// Mean slow-weight distance at every `t = 0..=T`.
    pub l1_by_step: Vec<f64>,
    pub l2_by_step: Vec<f64>,
    /// `F_S(v_{tau,t})` averaged over every run on an original dataset, indexed `[t - 1][tau]`.
    pub mean_fs_v: Vec<Vec<f64>>,
}

/// Column names matching [`StabilityEstimate::csv_fields`].
pub const STABILITY_CSV_HEADER: &str = "alpha,k,T,b,n,eta,l1_mean,l1_se,l2_mean,l2_se,samples";

impl StabilityEstimate {
    /// `l1^2 <= l2` up to three combined standard errors.
    pub fn jensen_consistent(&self) -> bool {
        let slack = 3.0 * combined_se(&[2.0 * self.l1_mean * self.std_error_l1, self.std_error_l2]);
        self.l1_mean * self.l1_mean <= self.l2_mean + slack + 1e-15
    }

    /// CSV fields in [`STABILITY_CSV_HEADER`] order. The `eta` column holds the
    /// largest step size of the schedule.
    pub fn csv_fields(&self, config: &LookaheadConfig, n: usize) -> Vec<String> {
        let eta = config.step_table().iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        vec![
            fmt_f64(config.alpha),
            config.k.to_string(),
            config.outer_steps.to_string(),
            config.batch_size.to_string(),
            n.to_string(),
            fmt_f64(eta),
            fmt_f64(self.l1_mean),
            fmt_f64(self.std_error_l1),
            fmt_f64(self.l2_mean),
            fmt_f64(self.std_error_l2),
            self.samples.to_string(),
        ]
    }
}

struct Cell {
    final_sq: f64,
    sq_by_step: Vec<f64>,
    fs_v: Vec<Vec<f64>>,
}

/// Estimates on-average model stability by nested Monte Carlo over datasets,
/// replaced indices and algorithm seeds. The seed field of `config` is
/// ignored; every cell derives its own from `plan.base_seed`.
pub fn estimate_stability(config: &LookaheadConfig, spec: &GeneratorSpec, n: usize, plan: &MonteCarloPlan) -> Result<StabilityEstimate> {
    if plan.datasets == 0 || plan.indices_per_dataset == 0 || plan.seeds_per_index == 0 || n == 0 {
        return Err(Error::Config("stability estimation needs at least one sample".into()));
    }
    config.validate()?;
    let model = spec.model()?;
    let base = plan.base_seed;
    let config = config.clone().with_record(RecordLevel::Full);

    let datasets: Vec<Dataset> =
        (0..plan.datasets).map(|d| generate_dataset(spec, n, seeds::dataset(base, d))).collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for d in 0..plan.datasets {
        let chosen: Vec<usize> = if plan.indices_per_dataset >= n {
            (0..n).collect()
        } else {
            let mut rng = rng_from_seed(seeds::index_choice(base, d));
            let mut picked = index::sample(&mut rng, n, plan.indices_per_dataset).into_vec();
            picked.sort_unstable();
            picked
        };
        for i in chosen {
            for s in 0..plan.seeds_per_index {
                cells.push((d, i, s));
            }
        }
    }

    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(d, i, s)| {
            let pair = make_neighbor(&datasets[d], i, spec, seeds::replacement(base, d, i, s))?;
            let cell_config = config.clone().with_seed(seeds::algorithm(base, d, i, s));
            let run = coupled_run(&cell_config, &model, &pair)?;
            Ok(Cell { final_sq: target_distance(plan.target, &run)?, sq_by_step: run.squared_distances, fs_v: run.original.fs_v })
        })
        .collect::<Result<_>>()?;

    Ok(summarize(&results))
}

fn summarize(results: &[Cell]) -> StabilityEstimate {
    let l2: Vec<f64> = results.iter().map(|c| c.final_sq).collect();
    let l1: Vec<f64> = l2.iter().map(|d| d.sqrt()).collect();
    let (l1s, l2s) = (MeanSe::from_samples(&l1), MeanSe::from_samples(&l2));
    let count = results.len() as f64;
    let steps = results[0].sq_by_step.len();
    let mut l1_by_step = vec![0.0; steps];
    let mut l2_by_step = vec![0.0; steps];
    let mut mean_fs_v: Vec<Vec<f64>> = results[0].fs_v.iter().map(|row| vec![0.0; row.len()]).collect();
    for cell in results {
        for (t, sq) in cell.sq_by_step.iter().enumerate() {
            l1_by_step[t] += sq.sqrt() / count;
            l2_by_step[t] += sq / count;
        }
        for (acc, row) in mean_fs_v.iter_mut().zip(&cell.fs_v) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v / count;
            }
        }
    }
    StabilityEstimate {
        l1_mean: l1s.mean,
        l2_mean: l2s.mean,
        std_error_l1: l1s.se,
        std_error_l2: l2s.se,
        samples: results.len(),
        l1_by_step,
        l2_by_step,
        mean_fs_v,
    }
}

/// Exact stability of a fixed dataset and fixed replacements, averaging over
/// every replaced index `i` and every possible minibatch index sequence.
///
/// There are `n^(b k T)` index sequences, so this is only usable at toy sizes.
pub fn exhaustive_stability(config: &LookaheadConfig, model: &LossModel, data: &Dataset, replacements: &[DataPoint]) -> Result<StabilityEstimate> {
    config.validate()?;
    let n = data.len();
    if replacements.len() != n {
        return Err(Error::Config(format!("need one replacement per point ({n}), got {}", replacements.len())));
    }
    let draws = config.batch_size * config.total_steps();
    let sequences = (n as f64).powi(draws as i32);
    if sequences > 1e7 {
        return Err(Error::Config(format!("{sequences} index sequences is too many to enumerate")));
    }
    let sequences = sequences as usize;
    let config = config.clone().with_record(RecordLevel::Full);
    let mut results = Vec::with_capacity(n * sequences);
    for (i, z) in replacements.iter().enumerate() {
        let pair = NeighborPair::new(data.clone(), i, z.clone())?;
        for code in 0..sequences {
            let flat = digits(code, n, draws);
            let script: Vec<Vec<usize>> = flat.chunks(config.batch_size).map(<[usize]>::to_vec).collect();
            let original = lookahead_run_with(&config, model, &pair.original, &mut ScriptedIndices::new(script.clone()))?;
            let neighbor = lookahead_run_with(&config, model, &pair.neighbor, &mut ScriptedIndices::new(script))?;
            let run = couple(original, neighbor);
            results.push(Cell { final_sq: *run.squared_distances.last().expect("nonempty"), sq_by_step: run.squared_distances, fs_v: run.original.fs_v });
        }
    }
    let mut estimate = summarize(&results);
    estimate.std_error_l1 = 0.0;
    estimate.std_error_l2 = 0.0;
    Ok(estimate)
}

/// Base-`n` digits of `code`, least significant first.
fn digits(mut code: usize, n: usize, len: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let d = code % n;
            code /= n;
            d
        })
        .collect()
}

/// Slow-weight distance between two runs' final iterates.
pub fn final_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    (a.final_slow() - b.final_slow()).norm()
}
