use std::io::Write;

use crate::error::{Error, Result};
use crate::experiments::csv::fmt_f64;
use crate::problems::{Dataset, LossModel, Weights};

use super::config::{LookaheadConfig, RecordLevel};
use super::sampling::{IndexSource, RngIndices};
use super::sgd::sgd_inner;

/// Everything recorded during one Lookahead run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub alpha: f64,
    pub k: usize,
    pub record: RecordLevel,
    /// `w_0, ..., w_T`
    pub slow: Vec<Weights>,
    /// `fast[t - 1]` holds `v_{0,t}, ..., v_{k,t}`; empty unless recorded in full.
    pub fast: Vec<Vec<Weights>>,
    /// `fs_v[t - 1][tau] = F_S(v_{tau,t})` for `tau < k`; empty unless recorded in full.
    pub fs_v: Vec<Vec<f64>>,
    /// `index_log[t - 1][tau]` is the minibatch of inner step `tau` in outer step `t`.
    pub index_log: Vec<Vec<Vec<usize>>>,
}

impl Trajectory {
    /// `w_T`
    pub fn final_slow(&self) -> &Weights {
        self.slow.last().expect("trajectory always holds w_0")
    }

    pub fn outer_steps(&self) -> usize {
        self.slow.len() - 1
    }

    /// One row per `(t, tau)`: `t,tau,F_S_v,w_norm`, with `w_norm = ||v_{tau,t}||`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.require_full()?;
        writeln!(out, "t,tau,F_S_v,w_norm")?;
        for (h, (risks, iterates)) in self.fs_v.iter().zip(&self.fast).enumerate() {
            for (tau, risk) in risks.iter().enumerate() {
                writeln!(out, "{},{},{},{}", h + 1, tau, fmt_f64(*risk), fmt_f64(iterates[tau].norm()))?;
            }
        }
        Ok(())
    }

    /// Slow-weight snapshots, one row per `t` with columns `t,w_0,...`.
    pub fn write_slow_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.slow[0].len();
        let header: Vec<String> = (0..dim).map(|j| format!("w_{j}")).collect();
        writeln!(out, "t,{}", header.join(","))?;
        for (t, w) in self.slow.iter().enumerate() {
            let cols: Vec<String> = w.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(out, "{t},{}", cols.join(","))?;
        }
        Ok(())
    }

    fn require_full(&self) -> Result<()> {
        match self.record {
            RecordLevel::Full => Ok(()),
            RecordLevel::SlowOnly => Err(Error::MissingData("trajectory was recorded slow-only".into())),
        }
    }
}

/// Runs Lookahead with minibatches drawn from the configured seed.
pub fn lookahead_run(config: &LookaheadConfig, model: &LossModel, data: &Dataset) -> Result<Trajectory> {
    lookahead_run_with(config, model, data, &mut RngIndices::new(config.seed))
}

/// Runs Lookahead with an explicit minibatch index source.
pub fn lookahead_run_with(
    config: &LookaheadConfig,
    model: &LossModel,
    data: &Dataset,
    indices: &mut dyn IndexSource,
) -> Result<Trajectory> {
    config.validate()?;
    for warning in config.convex_window_warnings(model.smoothness()) {
        log::warn!("{warning}");
    }
    let mut w = match &config.w0 {
        Some(w0) => w0.clone(),
        None => Weights::zeros(model.dim()),
    };
    let full = config.record == RecordLevel::Full;
    let mut traj = Trajectory {
        alpha: config.alpha,
        k: config.k,
        record: config.record,
        slow: vec![w.clone()],
        fast: Vec::new(),
        fs_v: Vec::new(),
        index_log: Vec::with_capacity(config.outer_steps),
    };
    let alpha = config.alpha;
    for t in 1..=config.outer_steps {
        let steps = config.schedule.inner_steps(t, config.k);
        let inner = sgd_inner(model, data, &w, &steps, config.batch_size, indices, full)?;
        w = &w * (1.0 - alpha) + &inner.end * alpha;
        traj.slow.push(w.clone());
        traj.index_log.push(inner.batches);
        if full {
            traj.fast.push(inner.iterates);
            traj.fs_v.push(inner.risks);
        }
    }
    Ok(traj)
}

/// `(1 / Tk) sum_t sum_{tau < k} v_{tau,t}`
pub fn averaged_iterate(traj: &Trajectory) -> Result<Weights> {
    traj.require_full()?;
    let mut sum = Weights::zeros(traj.slow[0].len());
    let mut count = 0usize;
    for iterates in &traj.fast {
        for v in &iterates[..traj.k] {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::MissingData("trajectory has no fast iterates".into()));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{minibatch_sgd, ScriptedIndices};
    use crate::problems::{DataPoint, LossKind};

    fn one_point() -> (LossModel, Dataset) {
        let model = LossModel::new(LossKind::LeastSquares, 1, 1.0).unwrap();
        let data = Dataset::new(vec![DataPoint::new(vec![1.0], 1.0)]).unwrap();
        (model, data)
    }

    #[test]
    fn midpoint_interpolation() {
        // From w_0 = 0 one step of size 1 on (x=1, y=1) lands exactly on 1.
        let (model, data) = one_point();
        let config = LookaheadConfig::new(0.5, 1, 1, 1.0, 1, 0);
        let traj = lookahead_run(&config, &model, &data).unwrap();
        assert_eq!(traj.fast[0][1][0], 1.0);
        assert_eq!(traj.slow[1][0], 0.5);
    }

    #[test]
    fn fixed_point_stays_put() {
        let model = LossModel::new(LossKind::LeastSquares, 1, 2.0).unwrap();
        let data = Dataset::new(vec![DataPoint::new(vec![1.0], 2.0), DataPoint::new(vec![2.0], 4.0)]).unwrap();
        let w0 = Weights::from_element(1, 2.0);
        let config = LookaheadConfig::new(0.7, 3, 4, 0.2, 2, 9).with_w0(w0.clone());
        let traj = lookahead_run(&config, &model, &data).unwrap();
        assert!(traj.slow.iter().all(|w| *w == w0));
    }

    #[test]
    fn degenerates_to_sgd() {
        let model = LossModel::new(LossKind::LeastSquares, 2, 1.0).unwrap();
        let data = Dataset::new(vec![
            DataPoint::new(vec![0.6, 0.0], 1.0),
            DataPoint::new(vec![0.0, 0.8], -0.5),
            DataPoint::new(vec![0.3, 0.4], 0.2),
        ])
        .unwrap();
        let config = LookaheadConfig::new(1.0, 1, 25, 0.4, 2, 17);
        let traj = lookahead_run(&config, &model, &data).unwrap();
        let sgd = minibatch_sgd(&model, &data, &Weights::zeros(2), &[0.4; 25], 2, 17).unwrap();
        assert_eq!(traj.slow, sgd);
    }

    #[test]
    fn averaged_iterate_examples() {
        let (model, data) = one_point();
        let mut traj = lookahead_run(&LookaheadConfig::new(0.5, 2, 1, 0.5, 1, 0), &model, &data).unwrap();
        traj.fast = vec![vec![Weights::from_element(1, 0.0), Weights::from_element(1, 2.0), Weights::zeros(1)]];
        assert_eq!(averaged_iterate(&traj).unwrap()[0], 1.0);
        traj.k = 1;
        traj.fast = vec![
            vec![Weights::from_element(1, 1.0), Weights::zeros(1)],
            vec![Weights::from_element(1, 3.0), Weights::zeros(1)],
        ];
        assert_eq!(averaged_iterate(&traj).unwrap()[0], 2.0);
        traj.record = RecordLevel::SlowOnly;
        assert!(averaged_iterate(&traj).is_err());
    }

    #[test]
    fn scripted_run_matches_logged_indices() {
        let model = LossModel::new(LossKind::LeastSquares, 1, 1.0).unwrap();
        let data = Dataset::new(vec![DataPoint::new(vec![1.0], 1.0), DataPoint::new(vec![0.5], -1.0)]).unwrap();
        let config = LookaheadConfig::new(0.3, 2, 3, 0.5, 2, 4);
        let traj = lookahead_run(&config, &model, &data).unwrap();
        let script: Vec<Vec<usize>> = traj.index_log.iter().flatten().cloned().collect();
        let replay = lookahead_run_with(&config, &model, &data, &mut ScriptedIndices::new(script)).unwrap();
        assert_eq!(traj, replay);
    }

    #[test]
    fn csv_layout() {
        let (model, data) = one_point();
        let traj = lookahead_run(&LookaheadConfig::new(0.5, 2, 2, 0.5, 1, 0), &model, &data).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,tau,F_S_v,w_norm");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,0,5.0000000000000000e-1,"));
    }
}
