use rand::Rng as _;

use crate::error::{Error, Result};
use crate::stats::{rng_from_seed, Rng};

/// Draws `b` indices i.i.d. uniformly from `0..n`, with replacement.
///
/// The count of any fixed index in one draw is `Binomial(b, 1/n)`.
pub fn sample_minibatch(rng: &mut Rng, n: usize, b: usize) -> Result<Vec<usize>> {
    if n == 0 || b == 0 {
        return Err(Error::Precondition(format!("minibatch needs n >= 1 and b >= 1 (got n={n}, b={b})")));
    }
    Ok((0..b).map(|_| rng.random_range(0..n)).collect())
}

/// Supplies the minibatch index sequence `J_{tau,t}` of a run.
pub trait IndexSource {
    fn next_batch(&mut self, n: usize, b: usize) -> Result<Vec<usize>>;
}

/// Seeded with-replacement sampling.
#[derive(Debug, Clone)]
pub struct RngIndices {
    rng: Rng,
}

impl RngIndices {
    pub fn new(seed: u64) -> Self {
        RngIndices { rng: rng_from_seed(seed) }
    }
}

impl IndexSource for RngIndices {
    fn next_batch(&mut self, n: usize, b: usize) -> Result<Vec<usize>> {
        sample_minibatch(&mut self.rng, n, b)
    }
}

/// Replays a fixed list of batches, e.g. a logged run or one branch of an
/// exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct ScriptedIndices {
    batches: Vec<Vec<usize>>,
    next: usize,
}

impl ScriptedIndices {
    pub fn new(batches: Vec<Vec<usize>>) -> Self {
        ScriptedIndices { batches, next: 0 }
    }
}

impl IndexSource for ScriptedIndices {
    fn next_batch(&mut self, n: usize, b: usize) -> Result<Vec<usize>> {
        let batch = self
            .batches
            .get(self.next)
            .ok_or_else(|| Error::MissingData(format!("script exhausted after {} batches", self.next)))?;
        if batch.len() != b {
            return Err(Error::Precondition(format!("scripted batch has {} indices, expected {b}", batch.len())));
        }
        if let Some(&index) = batch.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        self.next += 1;
        Ok(batch.clone())
    }
}
