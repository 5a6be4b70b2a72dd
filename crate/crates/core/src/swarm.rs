//! Finite swarms and the decentralized guidance step: every agent samples its
//! next bin from the column of the transition matrix for its current bin.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::markov::{DensityVector, StochasticMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwarmError {
    #[error("swarm has no agents")]
    Empty,
    #[error("spawn region is empty")]
    EmptyRegion,
    #[error("bin {bin} is out of range for {bins} bins")]
    OutOfRange { bin: usize, bins: usize },
}

/// Reproducible random stream keyed by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }
}

/// Agent positions together with the per-bin head count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwarmState {
    agent_bins: Vec<usize>,
    counts: Vec<usize>,
}

impl SwarmState {
    pub fn new(bins: usize, agent_bins: Vec<usize>) -> Result<Self, SwarmError> {
        let mut counts = vec![0; bins];
        for &b in &agent_bins {
            *counts
                .get_mut(b)
                .ok_or(SwarmError::OutOfRange { bin: b, bins })? += 1;
        }
        Ok(Self { agent_bins, counts })
    }

    pub fn empty(bins: usize) -> Self {
        Self {
            agent_bins: Vec::new(),
            counts: vec![0; bins],
        }
    }

    /// Agents laid out bin by bin in ascending order.
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let agent_bins = counts
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
            .collect();
        Self { agent_bins, counts }
    }

    pub fn agent_bins(&self) -> &[usize] {
        &self.agent_bins
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn population(&self) -> usize {
        self.agent_bins.len()
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn count_in(&self, bins: &BTreeSet<usize>) -> usize {
        bins.iter().map(|&b| self.counts[b]).sum()
    }
}

/// Moves every agent once: draw `z` uniform in `[0, 1)` and pick the first
/// row whose cumulative column sum exceeds `z`. Agents draw in list order from
/// the one stream.
pub fn step_agents(swarm: &SwarmState, matrix: &StochasticMatrix, rng: &mut RngStream) -> SwarmState {
    let mut counts = vec![0; swarm.num_bins()];
    let agent_bins = swarm
        .agent_bins
        .iter()
        .map(|&from| {
            let column = matrix.column(from);
            let to = sample_column(column, rng.uniform());
            counts[to] += 1;
            to
        })
        .collect();
    SwarmState { agent_bins, counts }
}

/// Inverse CDF over half-open intervals `[lo, hi)`; the last nonzero entry
/// closes at one so rounding in the cumulative sum never drops a draw.
fn sample_column(column: &[(usize, f64)], z: f64) -> usize {
    let mut cumulative = 0.0;
    for &(row, p) in column {
        cumulative += p;
        if z < cumulative {
            return row;
        }
    }
    column.last().map(|&(row, _)| row).expect("stochastic columns are nonempty")
}

pub fn empirical_distribution(swarm: &SwarmState) -> Result<DensityVector, SwarmError> {
    let n = swarm.population();
    if n == 0 {
        return Err(SwarmError::Empty);
    }
    Ok(DensityVector::from_raw(
        swarm.counts.iter().map(|&c| c as f64 / n as f64).collect(),
    ))
}

/// Places `count` agents i.i.d. uniformly over `region`.
pub fn spawn_uniform(
    bins: usize,
    region: &BTreeSet<usize>,
    count: usize,
    rng: &mut RngStream,
) -> Result<SwarmState, SwarmError> {
    if region.is_empty() {
        return Err(SwarmError::EmptyRegion);
    }
    if let Some(&bin) = region.iter().find(|&&b| b >= bins) {
        return Err(SwarmError::OutOfRange { bin, bins });
    }
    let cells: Vec<usize> = region.iter().copied().collect();
    let agents = (0..count).map(|_| cells[rng.index(cells.len())]).collect();
    SwarmState::new(bins, agents)
}
