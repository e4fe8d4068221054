//! Lookahead over with-replacement minibatch SGD.

mod config;
mod lookahead;
mod sampling;
mod sgd;

pub use config::{LookaheadConfig, RecordLevel, StepSchedule, WindowWarning};
pub use lookahead::{averaged_iterate, lookahead_run, lookahead_run_with, Trajectory};
pub use sampling::{sample_minibatch, IndexSource, RngIndices, ScriptedIndices};
pub use sgd::{minibatch_sgd, sgd_inner, InnerRun};
