//! Mutual elimination of co-located blue and red agents.

use thiserror::Error;

use crate::markov::DensityVector;
use crate::swarm::SwarmState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngagementError {
    #[error("swarms live on different regions ({blue} vs {red} bins)")]
    SizeMismatch { blue: usize, red: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationReport {
    pub eliminated_per_bin: Vec<usize>,
    pub blue_lost: usize,
    pub red_lost: usize,
}

impl EliminationReport {
    pub fn total(&self) -> usize {
        self.blue_lost
    }

    pub fn any(&self) -> bool {
        self.blue_lost > 0
    }
}

/// In every bin `min(s_b, s_r)` agents of each colour annihilate, leaving
/// `max(s_b - s_r, 0)` blue and `max(s_r - s_b, 0)` red. The lowest-index
/// agents in a bin are the ones removed.
pub fn eliminate(
    blue: &SwarmState,
    red: &SwarmState,
) -> Result<(SwarmState, SwarmState, EliminationReport), EngagementError> {
    if blue.num_bins() != red.num_bins() {
        return Err(EngagementError::SizeMismatch {
            blue: blue.num_bins(),
            red: red.num_bins(),
        });
    }
    let eliminated: Vec<usize> = blue
        .counts()
        .iter()
        .zip(red.counts())
        .map(|(&b, &r)| b.min(r))
        .collect();
    let lost: usize = eliminated.iter().sum();
    let report = EliminationReport {
        eliminated_per_bin: eliminated,
        blue_lost: lost,
        red_lost: lost,
    };
    if lost == 0 {
        return Ok((blue.clone(), red.clone(), report));
    }
    let blue_after = remove_lowest(blue, &report.eliminated_per_bin);
    let red_after = remove_lowest(red, &report.eliminated_per_bin);
    Ok((blue_after, red_after, report))
}

fn remove_lowest(swarm: &SwarmState, quota: &[usize]) -> SwarmState {
    let mut left = quota.to_vec();
    let survivors = swarm
        .agent_bins()
        .iter()
        .copied()
        .filter(|&b| {
            if left[b] > 0 {
                left[b] -= 1;
                false
            } else {
                true
            }
        })
        .collect();
    SwarmState::new(swarm.num_bins(), survivors).expect("bins already validated")
}

/// Surviving population and its distribution; `None` once the swarm is gone.
pub fn reconfigure(swarm: &SwarmState) -> (usize, Option<DensityVector>) {
    let n = swarm.population();
    let x = (n > 0).then(|| {
        DensityVector::from_raw(swarm.counts().iter().map(|&c| c as f64 / n as f64).collect())
    });
    (n, x)
}
