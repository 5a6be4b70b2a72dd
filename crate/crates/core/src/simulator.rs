//! The engagement loop: red follows its chain toward the base, blue follows
//! its planner, co-located agents annihilate, and entrants are counted.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engagement::eliminate;
use crate::gridworld::{build_grid_adjacency, compute_boundary_layers, GridError, GridSpec};
use crate::markov::{synthesize, tv_distance, DensityVector, MarkovError, StochasticMatrix};
use crate::strategy::{select_boundary, EngagementPlan, Phase, PhaseController, StrategyConfig, StrategyError};
use crate::swarm::{empirical_distribution, spawn_uniform, step_agents, RngStream, SwarmError, SwarmState};

pub const RED_STREAM: u64 = 0;
pub const BLUE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Swarm(#[from] SwarmError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// A fully resolved scenario: regions are explicit bin sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub red_count: usize,
    pub red_init: BTreeSet<usize>,
    /// Red's desired distribution, supported on the base.
    pub v_b: DensityVector,
    pub blue_count: usize,
    pub blue_init: BTreeSet<usize>,
    pub strategy: StrategyConfig,
    pub max_steps: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let m = self.grid.num_bins();
        self.strategy.validate()?;
        if self.v_b.len() != m {
            return Err(SimError::Invalid(format!("v_b has {} entries for {m} bins", self.v_b.len())));
        }
        if !self.v_b.support().is_subset(self.grid.base_bins()) {
            return Err(SimError::Invalid("v_b puts mass outside the base".into()));
        }
        for (name, region, count) in [
            ("red", &self.red_init, self.red_count),
            ("blue", &self.blue_init, self.blue_count),
        ] {
            if count > 0 && region.is_empty() {
                return Err(SimError::Invalid(format!("{name} start region is empty")));
            }
            if let Some(&bin) = region.iter().find(|&&b| b >= m || self.grid.is_obstacle(b)) {
                return Err(SimError::Invalid(format!("{name} start region contains blocked bin {bin}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    RedAnnihilated,
    RedInBase,
    MaxSteps,
}

/// State after step `step` (step 0 is the initial placement).
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub s_b: Vec<usize>,
    pub s_r: Vec<usize>,
    pub eliminated: Vec<usize>,
    pub entered_cum: usize,
    /// Blue's total variation distance to its current target, when it has one.
    pub blue_tv: Option<f64>,
    pub phase: Option<Phase>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub option: String,
    pub desired_ratio: f64,
    pub layer: Option<usize>,
    pub t_fc: Option<usize>,
    pub t_lc: Option<usize>,
    pub estimated_tv: Option<f64>,
    pub estimated_leakage: Option<f64>,
    pub estimated_ratio: Option<f64>,
    pub plan_chosen: bool,
    pub initial_blue: usize,
    pub initial_red: usize,
    pub final_blue: usize,
    pub final_red: usize,
    pub red_entered: usize,
    pub replans: usize,
    pub steps: usize,
    pub termination: TerminationReason,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub records: Vec<StepRecord>,
    pub elapsed: Duration,
}

/// Everything fixed before the first step.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub red_chain: StochasticMatrix,
    pub red: SwarmState,
    pub blue: SwarmState,
    pub plan: Option<EngagementPlan>,
    pub controller: Option<PhaseController>,
    /// Streams positioned just after spawning.
    pub red_rng: RngStream,
    pub blue_rng: RngStream,
}

/// Builds red's chain, spawns both swarms and plans blue's defense.
pub fn prepare(config: &ScenarioConfig) -> Result<Prepared, SimError> {
    config.validate()?;
    let grid = &config.grid;
    let m = grid.num_bins();
    let adjacency = build_grid_adjacency(grid);
    let layers = compute_boundary_layers(&adjacency, grid.base_bins())?;
    let red_chain = synthesize(&config.v_b, &adjacency)?;

    let mut red_rng = RngStream::new(config.seed, RED_STREAM);
    let mut blue_rng = RngStream::new(config.seed, BLUE_STREAM);
    let red = spawn_or_empty(m, &config.red_init, config.red_count, &mut red_rng)?;
    let blue = spawn_or_empty(m, &config.blue_init, config.blue_count, &mut blue_rng)?;

    let mut plan = None;
    if red.population() > 0 && blue.population() > 0 {
        let x_r = empirical_distribution(&red)?;
        let x_b = empirical_distribution(&blue)?;
        match select_boundary(
            &red_chain,
            &x_r,
            &x_b,
            blue.population(),
            red.population(),
            &layers,
            &adjacency,
            &config.strategy,
        ) {
            Ok(p) => plan = Some(p),
            Err(StrategyError::NoAdmissibleLayer) => {
                log::warn!("red already touches the base layers; blue holds position");
            }
            Err(e) => return Err(e.into()),
        }
    }
    let controller = plan
        .as_ref()
        .map(|p| PhaseController::new(p, &red_chain, &adjacency, &layers, &config.strategy));
    Ok(Prepared {
        red_chain,
        red,
        blue,
        plan,
        controller,
        red_rng,
        blue_rng,
    })
}

fn spawn_or_empty(
    bins: usize,
    region: &BTreeSet<usize>,
    count: usize,
    rng: &mut RngStream,
) -> Result<SwarmState, SwarmError> {
    if count == 0 {
        Ok(SwarmState::empty(bins))
    } else {
        spawn_uniform(bins, region, count, rng)
    }
}

pub fn run(config: &ScenarioConfig) -> Result<RunOutcome, SimError> {
    let started = Instant::now();
    let Prepared {
        red_chain,
        mut red,
        mut blue,
        plan,
        mut controller,
        mut red_rng,
        mut blue_rng,
    } = prepare(config)?;
    let m = config.grid.num_bins();
    let base = config.grid.base_bins();
    let identity = StochasticMatrix::identity(m);

    let initial_red = red.population();
    let initial_blue = blue.population();
    let mut entered_cum = 0;
    let mut records = vec![record(0, &blue, &red, vec![0; m], entered_cum, controller.as_ref())];
    let mut step = 0;
    let termination = loop {
        if red.population() == 0 {
            break TerminationReason::RedAnnihilated;
        }
        if red.count_in(base) == red.population() {
            break TerminationReason::RedInBase;
        }
        if step >= config.max_steps {
            break TerminationReason::MaxSteps;
        }
        step += 1;
        let in_base_before = red.count_in(base);
        red = step_agents(&red, &red_chain, &mut red_rng);
        let blue_matrix = controller.as_ref().map_or(&identity, |c| c.blue_matrix());
        blue = step_agents(&blue, blue_matrix, &mut blue_rng);
        entered_cum += red.count_in(base).saturating_sub(in_base_before);
        let (b, r, report) = eliminate(&blue, &red).expect("swarms share the grid");
        blue = b;
        red = r;
        if let Some(c) = controller.as_mut() {
            c.end_of_step(&red, &blue, &report);
        }
        records.push(record(
            step,
            &blue,
            &red,
            report.eliminated_per_bin,
            entered_cum,
            controller.as_ref(),
        ));
    };

    let summary = RunSummary {
        seed: config.seed,
        option: config.strategy.option.to_string(),
        desired_ratio: config.strategy.epsilon_opt,
        layer: plan.as_ref().map(|p| p.projection.layer_index),
        t_fc: plan.as_ref().map(|p| p.projection.t_fc),
        t_lc: plan.as_ref().map(|p| p.projection.t_lc),
        estimated_tv: plan.as_ref().map(|p| p.estimated_tv()),
        estimated_leakage: plan.as_ref().map(|p| p.leakage),
        estimated_ratio: plan.as_ref().map(|p| p.leakage_ratio()),
        plan_chosen: plan.as_ref().is_some_and(|p| p.chosen),
        initial_blue,
        initial_red,
        final_blue: blue.population(),
        final_red: red.population(),
        red_entered: entered_cum,
        replans: controller.as_ref().map_or(0, |c| c.replans()),
        steps: step,
        termination,
    };
    Ok(RunOutcome {
        summary,
        records,
        elapsed: started.elapsed(),
    })
}

fn record(
    step: usize,
    blue: &SwarmState,
    red: &SwarmState,
    eliminated: Vec<usize>,
    entered_cum: usize,
    controller: Option<&PhaseController>,
) -> StepRecord {
    let blue_tv = controller.and_then(|c| {
        empirical_distribution(blue)
            .ok()
            .map(|x| tv_distance(&x, c.target()))
    });
    StepRecord {
        step,
        s_b: blue.counts().to_vec(),
        s_r: red.counts().to_vec(),
        eliminated,
        entered_cum,
        blue_tv,
        phase: controller.map(|c| c.phase()),
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub runs: Vec<RunOutcome>,
    pub mean_entered: f64,
    pub std_entered: f64,
    pub mean_blue_lost: f64,
    pub mean_red_lost: f64,
    /// Mean blue TV per step over the runs that still report one at that step.
    pub mean_tv: Vec<f64>,
}

/// Runs seeds `seed, seed + 1, ...` in parallel.
pub fn run_ensemble(config: &ScenarioConfig, n_runs: usize) -> Result<EnsembleReport, SimError> {
    if n_runs == 0 {
        return Err(SimError::Invalid("an ensemble needs at least one run".into()));
    }
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i);
            run(&c)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let entered: Vec<f64> = runs.iter().map(|r| r.summary.red_entered as f64).collect();
    let (mean_entered, std_entered) = mean_std(&entered);
    let n = n_runs as f64;
    let mean_blue_lost = runs
        .iter()
        .map(|r| (r.summary.initial_blue - r.summary.final_blue) as f64)
        .sum::<f64>()
        / n;
    let mean_red_lost = runs
        .iter()
        .map(|r| (r.summary.initial_red - r.summary.final_red) as f64)
        .sum::<f64>()
        / n;
    let longest = runs.iter().map(|r| r.records.len()).max().unwrap_or(0);
    let mean_tv = (0..longest)
        .map(|k| {
            let vals: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.records.get(k).and_then(|rec| rec.blue_tv))
                .collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    Ok(EnsembleReport {
        runs,
        mean_entered,
        std_entered,
        mean_blue_lost,
        mean_red_lost,
        mean_tv,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
