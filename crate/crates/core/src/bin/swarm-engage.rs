// Command-line front end.
//
//   swarm-engage run --config scenarios/scenario_2d.toml --out out/ --heatmaps
//   swarm-engage ensemble --config scenarios/scenario_2d.toml --runs 30 --out out/
//   swarm-engage plan --config scenarios/scenario_3d.toml
//   swarm-engage validate --config scenarios/scenario_2d.toml
//
// Exit codes: 0 ok, 1 bad config or usage, 2 infeasible scenario.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use swarm_engage::config::{ConfigError, ConfigFile};
use swarm_engage::gridworld::{build_grid_adjacency, compute_boundary_layers};
use swarm_engage::output;
use swarm_engage::simulator::{prepare, run, run_ensemble, RunOutcome, ScenarioConfig, SimError};
use swarm_engage::strategy::PhaseOption;

#[derive(Parser)]
#[command(name = "swarm-engage", version, about = "Swarm-versus-swarm engagement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one engagement.
    Run(Common),
    /// Simulate several seeds and aggregate.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
    /// Choose the boundary layer without simulating.
    Plan(Common),
    /// Check the config and the grid's connectivity.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["freeze", "replan"])]
    option: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write PPM heatmaps for every step.
    #[arg(long)]
    heatmaps: bool,
}

enum Failure {
    Config(String),
    Infeasible(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(msg) => Failure::Config(msg),
            other => Failure::Infeasible(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("output: {e}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(c) => cmd_run(&c),
        Command::Ensemble { common, runs } => cmd_ensemble(&common, runs),
        Command::Plan(c) => cmd_plan(&c),
        Command::Validate(c) => cmd_validate(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Config file with command-line overrides applied and defaults filled in.
fn load(common: &Common) -> Result<(ConfigFile, ScenarioConfig), Failure> {
    let mut file = ConfigFile::load(&common.config)?;
    if let Some(seed) = common.seed {
        file.sim.seed = seed;
    }
    if let Some(opt) = &common.option {
        file.strategy.option = opt.parse::<PhaseOption>().map_err(Failure::Config)?;
    }
    let file = file.resolved();
    let scenario = file.scenario()?;
    Ok((file, scenario))
}

fn write_run(dir: &Path, file: &ConfigFile, scenario: &ScenarioConfig, outcome: &RunOutcome, heatmaps: bool) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved.toml"), file.to_toml())?;
    output::write_summary(&dir.join("summary.toml"), &outcome.summary)?;
    output::write_steps_csv(&dir.join("steps.csv"), &outcome.records)?;
    if heatmaps {
        let maps = dir.join("heatmaps");
        for rec in &outcome.records {
            output::write_heatmaps(
                &maps,
                &scenario.grid,
                rec,
                outcome.summary.initial_blue,
                outcome.summary.initial_red,
            )?;
        }
    }
    Ok(())
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let (file, scenario) = load(common)?;
    let outcome = run(&scenario)?;
    let s = &outcome.summary;
    print!("{}", toml::to_string(s).expect("summary serializes"));
    println!("runtime_ms = {}", outcome.elapsed.as_millis());
    if let Some(dir) = &common.out {
        write_run(dir, &file, &scenario, &outcome, common.heatmaps)?;
    }
    Ok(())
}

fn cmd_ensemble(common: &Common, runs: usize) -> Result<(), Failure> {
    if runs == 0 {
        return Err(Failure::Config("--runs must be at least 1".into()));
    }
    let (file, scenario) = load(common)?;
    let report = run_ensemble(&scenario, runs)?;
    println!("runs = {runs}");
    println!("mean_red_entered = {}", report.mean_entered);
    println!("std_red_entered = {}", report.std_entered);
    println!("mean_blue_lost = {}", report.mean_blue_lost);
    println!("mean_red_lost = {}", report.mean_red_lost);
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.resolved.toml"), file.to_toml())?;
        output::write_ensemble_summary(&dir.join("ensemble.toml"), &report)?;
        for (i, outcome) in report.runs.iter().enumerate() {
            let mut per_run = file.clone();
            per_run.sim.seed = outcome.summary.seed;
            write_run(&dir.join(format!("run_{i:03}")), &per_run, &scenario, outcome, common.heatmaps)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PlanReport {
    seed: u64,
    layer: usize,
    t_fc: usize,
    t_lc: usize,
    estimated_tv: f64,
    estimated_leakage: f64,
    estimated_ratio: f64,
    desired_ratio: f64,
    chosen: bool,
    target_bins: Vec<usize>,
}

fn cmd_plan(common: &Common) -> Result<(), Failure> {
    let (_, scenario) = load(common)?;
    let prepared = prepare(&scenario)?;
    let plan = prepared.plan.ok_or_else(|| {
        Failure::Infeasible("no plan: a swarm is empty or red already touches the base layers".into())
    })?;
    let report = PlanReport {
        seed: scenario.seed,
        layer: plan.projection.layer_index,
        t_fc: plan.projection.t_fc,
        t_lc: plan.projection.t_lc,
        estimated_tv: plan.estimated_tv(),
        estimated_leakage: plan.leakage,
        estimated_ratio: plan.leakage_ratio(),
        desired_ratio: scenario.strategy.epsilon_opt,
        chosen: plan.chosen,
        target_bins: plan.projection.x_rs_hat.support().into_iter().collect(),
    };
    let text = toml::to_string(&report).expect("plan serializes");
    print!("{text}");
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("plan.toml"), text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidationReport {
    bins: usize,
    free_bins: usize,
    obstacle_bins: usize,
    base_bins: usize,
    layers: usize,
    base_strongly_connected: bool,
    unreachable_bins: usize,
}

fn cmd_validate(common: &Common) -> Result<(), Failure> {
    let (file, scenario) = load(common)?;
    scenario.validate()?;
    let grid = &scenario.grid;
    let adjacency = build_grid_adjacency(grid);
    let layers = compute_boundary_layers(&adjacency, grid.base_bins())
        .map_err(|e| Failure::Infeasible(e.to_string()))?;
    let unreachable: Vec<usize> = grid.free_bins().filter(|&b| layers.depth(b).is_none()).collect();
    let report = ValidationReport {
        bins: grid.num_bins(),
        free_bins: grid.free_bins().count(),
        obstacle_bins: grid.obstacles().len(),
        base_bins: grid.base_bins().len(),
        layers: layers.len(),
        base_strongly_connected: adjacency.is_strongly_connected(grid.base_bins()),
        unreachable_bins: unreachable.len(),
    };
    print!("{}", toml::to_string(&report).expect("report serializes"));
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.resolved.toml"), file.to_toml())?;
        fs::write(dir.join("validation.toml"), toml::to_string(&report).expect("report serializes"))?;
    }
    if !report.base_strongly_connected {
        return Err(Failure::Infeasible("base bins are not strongly connected".into()));
    }
    if let Some(&bin) = unreachable
        .iter()
        .find(|b| scenario.red_init.contains(b) || scenario.blue_init.contains(b))
    {
        return Err(Failure::Infeasible(format!("start bin {bin} cannot reach the base")));
    }
    println!("connectivity = \"ok\"");
    Ok(())
}
