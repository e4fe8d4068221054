//! Lookahead on synthetic convex problems: coupled-run stability estimates,
//! closed-form stability and risk bounds, and reproducible experiment sweeps.
//!
//! The guide in `book/` walks through each module with runnable examples.

pub mod bounds;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod optimizer;
pub mod problems;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/lookahead.md")]
    mod lookahead {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
