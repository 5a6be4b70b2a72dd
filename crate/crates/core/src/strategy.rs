//! The defending swarm's planner.
//!
//! Blue picks a boundary layer around the base, predicts where the red swarm
//! will cross it by making the layer absorbing in red's chain, converges onto
//! that crossing distribution, and estimates how many red agents leak through.
//! The layer selection walks outward from the base and keeps the farthest
//! layer whose estimated leakage ratio stays under `epsilon_opt`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engagement::EliminationReport;
use crate::gridworld::{AdjacencyMatrix, BoundaryLayers};
use crate::markov::{make_absorbing, synthesize_from, tv_distance, DensityVector, MarkovError, StochasticMatrix};
use crate::swarm::{empirical_distribution, SwarmState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error("red mass {residual:e} still outside the layer after {horizon} steps")]
    HorizonExceeded { horizon: usize, residual: f64 },
    #[error("red mass {mass:e} already inside layer {layer} or closer to the base")]
    PreconditionViolated { layer: usize, mass: f64 },
    #[error("red swarm occupies no bin outside the base layers")]
    NoAdmissibleLayer,
    #[error("red swarm is empty")]
    NoRedAgents,
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// Phase-2 behaviour after red first reaches the chosen layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseOption {
    /// Blue stops moving (identity matrix).
    Freeze,
    /// Blue re-projects and re-synthesizes after every elimination.
    Replan,
}

impl std::str::FromStr for PhaseOption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "freeze" => Ok(Self::Freeze),
            "replan" => Ok(Self::Replan),
            other => Err(format!("unknown option `{other}` (expected freeze or replan)")),
        }
    }
}

impl std::fmt::Display for PhaseOption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Freeze => "freeze",
            Self::Replan => "replan",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub epsilon_opt: f64,
    pub option: PhaseOption,
    /// Mass below which a bin set counts as empty when timing contacts.
    pub mass_tolerance: f64,
    /// Iteration cap for the absorbing projection; `None` means `50 * m`.
    pub horizon_cap: Option<usize>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            epsilon_opt: 0.1,
            option: PhaseOption::Freeze,
            mass_tolerance: 1e-9,
            horizon_cap: None,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if !(self.epsilon_opt > 0.0 && self.epsilon_opt < 1.0) {
            return Err(StrategyError::InvalidConfig(format!(
                "epsilon_opt must lie in (0, 1), got {}",
                self.epsilon_opt
            )));
        }
        if !(self.mass_tolerance > 0.0) {
            return Err(StrategyError::InvalidConfig(format!(
                "mass_tolerance must be positive, got {}",
                self.mass_tolerance
            )));
        }
        Ok(())
    }

    pub fn horizon(&self, bins: usize) -> usize {
        self.horizon_cap.unwrap_or(50 * bins)
    }
}

/// Where and when red mass crosses a boundary layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEstimate {
    pub layer_index: usize,
    pub layer: BTreeSet<usize>,
    /// Distribution of the red mass absorbed by the layer, supported on it.
    pub x_rs_hat: DensityVector,
    /// First step at which more than the mass tolerance sits on the layer.
    pub t_fc: usize,
    /// First step at which at most the mass tolerance remains off the layer.
    pub t_lc: usize,
}

/// Runs red's chain with `layer` made absorbing, starting from `red`, until
/// the mass off the layer drops to the tolerance. Red mass already on the
/// layer counts as absorbed where it sits.
pub fn project_onto_layer(
    red_chain: &StochasticMatrix,
    red: &DensityVector,
    layer: &BTreeSet<usize>,
    layer_index: usize,
    config: &StrategyConfig,
) -> Result<ProjectionEstimate, StrategyError> {
    let m = red_chain.size();
    if red.len() != m {
        return Err(MarkovError::DimensionMismatch {
            expected: m,
            found: red.len(),
        }
        .into());
    }
    let eps = config.mass_tolerance;
    let absorbing = make_absorbing(red_chain, layer);
    let horizon = config.horizon(m);
    let mut x = red.values().to_vec();
    let mut t_fc = None;
    let mut residual = f64::NAN;
    for n in 0..=horizon {
        let inside: f64 = layer.iter().map(|&i| x[i]).sum();
        residual = x
            .iter()
            .enumerate()
            .filter(|(i, _)| !layer.contains(i))
            .map(|(_, v)| v)
            .sum();
        if t_fc.is_none() && inside > eps {
            t_fc = Some(n);
        }
        if residual <= eps {
            let t_lc = n;
            let mut hat = vec![0.0; m];
            for &i in layer {
                hat[i] = x[i];
            }
            let x_rs_hat = DensityVector::from_weights(hat)?;
            return Ok(ProjectionEstimate {
                layer_index,
                layer: layer.clone(),
                x_rs_hat,
                t_fc: t_fc.unwrap_or(t_lc),
                t_lc,
            });
        }
        x = absorbing.apply(&x);
    }
    Err(StrategyError::HorizonExceeded { horizon, residual })
}

/// Projection onto layer `p`, requiring red to start strictly outside it
/// (no mass on the base or on layers `1..=p`).
pub fn estimate_projection(
    red_chain: &StochasticMatrix,
    red: &DensityVector,
    layers: &BoundaryLayers,
    p: usize,
    config: &StrategyConfig,
) -> Result<ProjectionEstimate, StrategyError> {
    let layer = layers
        .layer(p)
        .ok_or_else(|| StrategyError::InvalidConfig(format!("layer {p} does not exist")))?;
    let closer: f64 = red
        .values()
        .iter()
        .enumerate()
        .filter(|&(i, _)| layers.depth(i).is_some_and(|d| d <= p))
        .map(|(_, v)| v)
        .sum();
    if closer > config.mass_tolerance {
        return Err(StrategyError::PreconditionViolated { layer: p, mass: closer });
    }
    project_onto_layer(red_chain, red, layer, p, config)
}

/// Blue density after `steps` moves with a fixed chain.
pub fn blue_at_contact(blue_chain: &StochasticMatrix, blue: &DensityVector, steps: usize) -> DensityVector {
    let mut x = blue.values().to_vec();
    for _ in 0..steps {
        x = blue_chain.apply(&x);
    }
    DensityVector::from_raw(x)
}

/// Red agents expected to slip through: `1ᵀ max(N_r x̂_rs − N_b x̂_b, 0)`.
pub fn leakage_bound(x_rs_hat: &DensityVector, x_b_hat: &DensityVector, n_blue: usize, n_red: usize) -> f64 {
    x_rs_hat
        .values()
        .iter()
        .zip(x_b_hat.values())
        .map(|(&r, &b)| (n_red as f64 * r - n_blue as f64 * b).max(0.0))
        .sum()
}

/// Leakage estimate for a blue chain run until red's first contact.
pub fn estimate_leakage(
    x_rs_hat: &DensityVector,
    t_fc: usize,
    blue_chain: &StochasticMatrix,
    blue: &DensityVector,
    n_blue: usize,
    n_red: usize,
) -> f64 {
    leakage_bound(x_rs_hat, &blue_at_contact(blue_chain, blue, t_fc), n_blue, n_red)
}

/// Equal-population form: `N · TV(x̂_rs, x̂_b)`.
pub fn estimate_leakage_equal_pop(x_rs_hat: &DensityVector, x_b_hat: &DensityVector, n: usize) -> f64 {
    n as f64 * tv_distance(x_rs_hat, x_b_hat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngagementPlan {
    pub projection: ProjectionEstimate,
    pub blue_chain: StochasticMatrix,
    /// Predicted blue density at red's first contact.
    pub blue_at_contact: DensityVector,
    pub leakage: f64,
    pub red_population: usize,
    /// `false` for the fallback plan that holds blue in place.
    pub chosen: bool,
}

impl EngagementPlan {
    pub fn leakage_ratio(&self) -> f64 {
        if self.red_population == 0 {
            0.0
        } else {
            self.leakage / self.red_population as f64
        }
    }

    pub fn estimated_tv(&self) -> f64 {
        tv_distance(&self.projection.x_rs_hat, &self.blue_at_contact)
    }
}

/// Farthest layer that red has not yet reached: red only occupies layers
/// beyond the returned index. Zero when red already touches layer 1 or the base.
pub fn admissible_depth(red: &DensityVector, layers: &BoundaryLayers, tolerance: f64) -> usize {
    red.values()
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > tolerance)
        .filter_map(|(i, _)| layers.depth(i))
        .min()
        .unwrap_or(0)
        .saturating_sub(1)
        .min(layers.len())
}

/// Walks layers outward from the base and returns the farthest plan whose
/// leakage ratio stays below `epsilon_opt`; layer 1 is always kept.
#[allow(clippy::too_many_arguments)]
pub fn select_boundary(
    red_chain: &StochasticMatrix,
    red: &DensityVector,
    blue: &DensityVector,
    n_blue: usize,
    n_red: usize,
    layers: &BoundaryLayers,
    adjacency: &AdjacencyMatrix,
    config: &StrategyConfig,
) -> Result<EngagementPlan, StrategyError> {
    config.validate()?;
    if n_red == 0 {
        return Err(StrategyError::NoRedAgents);
    }
    let reach = admissible_depth(red, layers, config.mass_tolerance);
    if reach == 0 {
        return Err(StrategyError::NoAdmissibleLayer);
    }
    let blue_depth = blue
        .support()
        .iter()
        .filter_map(|&i| layers.depth(i))
        .max()
        .unwrap_or(0);
    if n_blue > 0 && blue_depth >= reach {
        log::warn!(
            "blue starts at depth {blue_depth}, not strictly inside the red front at depth {reach}"
        );
    }

    let mut kept: Option<EngagementPlan> = None;
    for p in 1..=reach {
        let projection = match estimate_projection(red_chain, red, layers, p, config) {
            Ok(proj) => proj,
            Err(StrategyError::HorizonExceeded { .. }) if p > 1 => break,
            Err(e) => return Err(e),
        };
        let blue_chain = match synthesize_from(&projection.x_rs_hat, adjacency, blue) {
            Ok(chain) => chain,
            Err(e) if p == 1 => {
                log::warn!("blue cannot converge onto the first layer ({e}); holding position");
                return Ok(EngagementPlan {
                    projection,
                    blue_chain: StochasticMatrix::identity(red_chain.size()),
                    blue_at_contact: blue.clone(),
                    leakage: n_red as f64,
                    red_population: n_red,
                    chosen: false,
                });
            }
            Err(e) => return Err(e.into()),
        };
        let at_contact = blue_at_contact(&blue_chain, blue, projection.t_fc);
        let leakage = leakage_bound(&projection.x_rs_hat, &at_contact, n_blue, n_red);
        let plan = EngagementPlan {
            projection,
            blue_chain,
            blue_at_contact: at_contact,
            leakage,
            red_population: n_red,
            chosen: true,
        };
        if plan.leakage_ratio() < config.epsilon_opt || p == 1 {
            kept = Some(plan);
        } else {
            break;
        }
    }
    kept.ok_or(StrategyError::NoAdmissibleLayer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Converging onto the planned layer before red arrives.
    Approach,
    /// Frozen in place after first contact.
    Frozen,
    /// Following a re-synthesized chain after an elimination.
    Engaging,
    /// Holding position because no useful target remains.
    Holding,
}

/// Chooses blue's transition matrix step by step for a fixed plan.
#[derive(Debug, Clone)]
pub struct PhaseController {
    option: PhaseOption,
    config: StrategyConfig,
    layer_index: usize,
    layer: BTreeSet<usize>,
    red_chain: StochasticMatrix,
    adjacency: AdjacencyMatrix,
    depth: Vec<Option<usize>>,
    current: StochasticMatrix,
    identity: StochasticMatrix,
    target: DensityVector,
    phase: Phase,
    contact: bool,
    replans: usize,
}

impl PhaseController {
    pub fn new(
        plan: &EngagementPlan,
        red_chain: &StochasticMatrix,
        adjacency: &AdjacencyMatrix,
        layers: &BoundaryLayers,
        config: &StrategyConfig,
    ) -> Self {
        Self {
            option: config.option,
            config: config.clone(),
            layer_index: plan.projection.layer_index,
            layer: plan.projection.layer.clone(),
            red_chain: red_chain.clone(),
            adjacency: adjacency.clone(),
            depth: layers.depths().to_vec(),
            current: plan.blue_chain.clone(),
            identity: StochasticMatrix::identity(red_chain.size()),
            target: plan.projection.x_rs_hat.clone(),
            phase: if plan.chosen { Phase::Approach } else { Phase::Holding },
            contact: false,
            replans: 0,
        }
    }

    /// Matrix blue uses for the coming step.
    pub fn blue_matrix(&self) -> &StochasticMatrix {
        match self.phase {
            Phase::Frozen | Phase::Holding => &self.identity,
            Phase::Approach | Phase::Engaging => &self.current,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn target(&self) -> &DensityVector {
        &self.target
    }

    pub fn contact_made(&self) -> bool {
        self.contact
    }

    pub fn replans(&self) -> usize {
        self.replans
    }

    /// Feeds the outcome of a completed step (after elimination). Contact
    /// observed at the end of step `k` freezes blue from step `k + 1` on.
    pub fn end_of_step(&mut self, red: &SwarmState, blue: &SwarmState, report: &EliminationReport) {
        if !self.contact {
            let depth = &self.depth;
            let p = self.layer_index;
            self.contact = red
                .counts()
                .iter()
                .enumerate()
                .any(|(i, &c)| c > 0 && depth[i].is_some_and(|d| d <= p));
        }
        match self.option {
            PhaseOption::Freeze => {
                if self.contact && self.phase == Phase::Approach {
                    self.phase = Phase::Frozen;
                }
            }
            PhaseOption::Replan => {
                if report.any() {
                    self.replan(red, blue);
                }
            }
        }
    }

    /// Memoryless restart: project the red agents still on or beyond the
    /// layer (those on it stay where they are) and re-synthesize toward it.
    fn replan(&mut self, red: &SwarmState, blue: &SwarmState) {
        self.replans += 1;
        let p = self.layer_index;
        let weights: Vec<f64> = red
            .counts()
            .iter()
            .enumerate()
            .map(|(i, &c)| match self.depth[i] {
                Some(d) if d >= p => c as f64,
                _ => 0.0,
            })
            .collect();
        let outcome = DensityVector::from_weights(weights)
            .map_err(StrategyError::from)
            .and_then(|x| project_onto_layer(&self.red_chain, &x, &self.layer, p, &self.config))
            .and_then(|proj| {
                let x_b = empirical_distribution(blue)
                    .map_err(|_| StrategyError::InvalidConfig("blue swarm is empty".into()))?;
                let chain = synthesize_from(&proj.x_rs_hat, &self.adjacency, &x_b)?;
                Ok((proj, chain))
            });
        match outcome {
            Ok((proj, chain)) => {
                self.current = chain;
                self.target = proj.x_rs_hat;
                self.phase = Phase::Engaging;
            }
            Err(_) => self.phase = Phase::Holding,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{build_grid_adjacency, compute_boundary_layers, GridSpec};
    use crate::markov::synthesize;

    fn set(bins: &[usize]) -> BTreeSet<usize> {
        bins.iter().copied().collect()
    }

    struct Chain {
        layers: BoundaryLayers,
        red_chain: StochasticMatrix,
    }

    /// 1xn chain with the base at the right end; red walks right deterministically.
    fn chain(n: usize) -> Chain {
        let g = GridSpec::new(vec![1, n], BTreeSet::new(), set(&[n - 1])).unwrap();
        let adjacency = build_grid_adjacency(&g);
        let layers = compute_boundary_layers(&adjacency, g.base_bins()).unwrap();
        let red_chain = synthesize(&DensityVector::basis(n, n - 1), &adjacency).unwrap();
        Chain {
            layers,
            red_chain,
        }
    }

    #[test]
    fn deterministic_shift_projection() {
        let c = chain(4);
        let cfg = StrategyConfig::default();
        let est = estimate_projection(&c.red_chain, &DensityVector::basis(4, 0), &c.layers, 1, &cfg).unwrap();
        assert_eq!((est.t_fc, est.t_lc), (2, 2));
        assert_eq!(est.x_rs_hat, DensityVector::basis(4, 2));
        let est = estimate_projection(&c.red_chain, &DensityVector::basis(4, 1), &c.layers, 1, &cfg).unwrap();
        assert_eq!((est.t_fc, est.t_lc), (1, 1));
    }

    #[test]
    fn projection_preconditions_and_horizon() {
        let c = chain(4);
        let cfg = StrategyConfig::default();
        assert!(matches!(
            estimate_projection(&c.red_chain, &DensityVector::basis(4, 2), &c.layers, 1, &cfg),
            Err(StrategyError::PreconditionViolated { layer: 1, .. })
        ));
        assert!(matches!(
            estimate_projection(&c.red_chain, &DensityVector::basis(4, 1), &c.layers, 2, &cfg),
            Err(StrategyError::PreconditionViolated { layer: 2, .. })
        ));
        let stuck = StochasticMatrix::identity(4);
        assert!(matches!(
            estimate_projection(&stuck, &DensityVector::basis(4, 0), &c.layers, 1, &cfg),
            Err(StrategyError::HorizonExceeded { horizon: 200, .. })
        ));
    }

    #[test]
    fn leakage_cases() {
        let x = DensityVector::new(vec![0.0, 0.3, 0.7]).unwrap();
        assert_eq!(leakage_bound(&x, &x, 50, 50), 0.0);
        assert_eq!(leakage_bound(&x, &x, 0, 50), 50.0);
        // Table-style check: TV 0.078 at 1000 agents per side
        let r = DensityVector::new(vec![0.5, 0.5, 0.0]).unwrap();
        let b = DensityVector::new(vec![0.422, 0.5, 0.078]).unwrap();
        assert!((tv_distance(&r, &b) - 0.078).abs() < 1e-12);
        assert!((leakage_bound(&r, &b, 1000, 1000) - 78.0).abs() < 1e-9);
        assert!((estimate_leakage_equal_pop(&r, &b, 1000) - 78.0).abs() < 1e-9);
        let id = StochasticMatrix::identity(3);
        assert!((estimate_leakage(&r, 5, &id, &b, 1000, 1000) - 78.0).abs() < 1e-9);
    }

    #[test]
    fn equal_population_form_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = DensityVector::from_weights((0..5).map(|_| rng.random::<f64>()).collect()).unwrap();
            let b = DensityVector::from_weights((0..5).map(|_| rng.random::<f64>()).collect()).unwrap();
            let n = rng.random_range(1..5000);
            let mut brute = 0.0;
            for i in 0..5 {
                let d = n as f64 * a[i] - n as f64 * b[i];
                if d > 0.0 {
                    brute += d;
                }
            }
            assert!((estimate_leakage_equal_pop(&a, &b, n) - brute).abs() <= 1e-9 * n as f64);
        }
    }

    fn open_field() -> (GridSpec, AdjacencyMatrix, BoundaryLayers, StochasticMatrix) {
        // 1x12 corridor, base at the left end
        let g = GridSpec::new(vec![1, 12], BTreeSet::new(), set(&[0])).unwrap();
        let a = build_grid_adjacency(&g);
        let l = compute_boundary_layers(&a, g.base_bins()).unwrap();
        let red = synthesize(&DensityVector::basis(12, 0), &a).unwrap();
        (g, a, l, red)
    }

    #[test]
    fn far_red_allows_the_farthest_layer() {
        let (_, a, l, red_chain) = open_field();
        let red = DensityVector::basis(12, 11);
        let blue = DensityVector::basis(12, 0);
        let cfg = StrategyConfig::default();
        let plan = select_boundary(&red_chain, &red, &blue, 100, 100, &l, &a, &cfg).unwrap();
        // blue needs p steps to reach layer p and red needs 11 - p: every
        // p <= 5 converges in time, p = 6 would be reached at the same step
        assert_eq!(plan.projection.layer_index, 5);
        assert_eq!(plan.leakage, 0.0);
        assert!(plan.chosen);
        let again = select_boundary(&red_chain, &red, &blue, 100, 100, &l, &a, &cfg).unwrap();
        assert_eq!(again, plan);
    }

    #[test]
    fn first_layer_is_kept_even_when_it_leaks() {
        let (_, a, l, red_chain) = open_field();
        let red = DensityVector::basis(12, 3);
        let blue = DensityVector::basis(12, 11);
        let cfg = StrategyConfig::default();
        let plan = select_boundary(&red_chain, &red, &blue, 100, 100, &l, &a, &cfg).unwrap();
        assert_eq!(plan.projection.layer_index, 1);
        assert_eq!(plan.leakage, 100.0);
    }

    #[test]
    fn red_inside_the_base_has_no_admissible_layer() {
        let (_, a, l, red_chain) = open_field();
        let red = DensityVector::basis(12, 1);
        let blue = DensityVector::basis(12, 0);
        assert_eq!(
            select_boundary(&red_chain, &red, &blue, 10, 10, &l, &a, &StrategyConfig::default()),
            Err(StrategyError::NoAdmissibleLayer)
        );
    }

    fn report(lost: usize) -> EliminationReport {
        EliminationReport {
            eliminated_per_bin: vec![lost; 1],
            blue_lost: lost,
            red_lost: lost,
        }
    }

    fn corridor_plan(option: PhaseOption) -> (PhaseController, EngagementPlan) {
        let (_, a, l, red_chain) = open_field();
        let red = DensityVector::basis(12, 11);
        let blue = DensityVector::basis(12, 0);
        let cfg = StrategyConfig {
            option,
            ..StrategyConfig::default()
        };
        let plan = select_boundary(&red_chain, &red, &blue, 10, 10, &l, &a, &cfg).unwrap();
        (PhaseController::new(&plan, &red_chain, &a, &l, &cfg), plan)
    }

    #[test]
    fn freeze_switches_to_identity_after_contact() {
        let (mut ctl, plan) = corridor_plan(PhaseOption::Freeze);
        let far_red = SwarmState::from_counts({
            let mut c = vec![0; 12];
            c[10] = 10;
            c
        });
        let blue = SwarmState::from_counts({
            let mut c = vec![0; 12];
            c[3] = 10;
            c
        });
        for _ in 0..6 {
            assert_eq!(ctl.blue_matrix(), &plan.blue_chain);
            ctl.end_of_step(&far_red, &blue, &report(0));
        }
        // red reaches layer 5 at the end of step 6
        let at_layer = SwarmState::from_counts({
            let mut c = vec![0; 12];
            c[5] = 10;
            c
        });
        ctl.end_of_step(&at_layer, &blue, &report(0));
        assert_eq!(ctl.phase(), Phase::Frozen);
        assert_eq!(ctl.blue_matrix(), &StochasticMatrix::identity(12));
        ctl.end_of_step(&far_red, &blue, &report(3));
        assert_eq!(ctl.blue_matrix(), &StochasticMatrix::identity(12));
        assert_eq!(ctl.replans(), 0);
    }

    #[test]
    fn replan_triggers_once_per_elimination_step() {
        let (mut ctl, plan) = corridor_plan(PhaseOption::Replan);
        let mut red_counts = vec![0; 12];
        red_counts[5] = 2;
        red_counts[8] = 3;
        let red = SwarmState::from_counts(red_counts);
        let mut blue_counts = vec![0; 12];
        blue_counts[5] = 4;
        let blue = SwarmState::from_counts(blue_counts);
        ctl.end_of_step(&red, &blue, &report(0));
        assert_eq!(ctl.replans(), 0);
        assert_eq!(ctl.blue_matrix(), &plan.blue_chain);
        ctl.end_of_step(&red, &blue, &report(2));
        assert_eq!(ctl.replans(), 1);
        assert_eq!(ctl.phase(), Phase::Engaging);
        // all remaining red mass funnels into bin 5
        assert_eq!(ctl.target(), &DensityVector::basis(12, 5));
        ctl.end_of_step(&red, &blue, &report(0));
        assert_eq!(ctl.replans(), 1);
    }

    #[test]
    fn replan_holds_when_red_is_past_the_layer() {
        let (mut ctl, _) = corridor_plan(PhaseOption::Replan);
        let mut red_counts = vec![0; 12];
        red_counts[2] = 4;
        let red = SwarmState::from_counts(red_counts);
        let blue = SwarmState::from_counts({
            let mut c = vec![0; 12];
            c[4] = 1;
            c
        });
        ctl.end_of_step(&red, &blue, &report(1));
        assert_eq!(ctl.phase(), Phase::Holding);
        assert_eq!(ctl.blue_matrix(), &StochasticMatrix::identity(12));
    }

    #[test]
    fn config_validation() {
        let mut cfg = StrategyConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.epsilon_opt = 1.0;
        assert!(cfg.validate().is_err());
        cfg.epsilon_opt = 0.5;
        cfg.mass_tolerance = 0.0;
        assert!(cfg.validate().is_err());
        assert_eq!("Replan".parse::<PhaseOption>(), Ok(PhaseOption::Replan));
        assert!("hold".parse::<PhaseOption>().is_err());
    }
}
