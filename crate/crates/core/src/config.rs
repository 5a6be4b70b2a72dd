//! Scenario files (TOML). Regions are inclusive axis-aligned boxes.
//!
//! ```toml
//! [grid]
//! dims = [8, 8]
//! obstacles = [{ min = [3, 2], max = [4, 5] }]
//! base = { min = [0, 0], max = [1, 1] }
//!
//! [red]
//! count = 1000
//! init = { min = [5, 5], max = [7, 7] }   # a list of boxes, or "uniform_outside_base"
//!
//! [blue]
//! count = 1000
//! init = "base"
//!
//! [strategy]
//! epsilon_opt = 0.1
//! option = "freeze"
//!
//! [sim]
//! seed = 1
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{GridError, GridSpec};
use crate::markov::DensityVector;
use crate::simulator::ScenarioConfig;
use crate::strategy::StrategyConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: Vec<usize>,
    pub max: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKeyword {
    Base,
    UniformOutsideBase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Keyword(RegionKeyword),
    Box(BoxSpec),
    /// Union of boxes.
    Boxes(Vec<BoxSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub obstacles: Vec<BoxSpec>,
    pub base: BoxSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDistribution {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedSection {
    pub count: usize,
    pub init: Region,
    #[serde(default = "uniform")]
    pub v_b: BaseDistribution,
}

fn uniform() -> BaseDistribution {
    BaseDistribution::Uniform
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlueSection {
    pub count: usize,
    #[serde(default = "base_region")]
    pub init: Region,
}

fn base_region() -> Region {
    Region::Keyword(RegionKeyword::Base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    #[serde(default = "default_epsilon")]
    pub epsilon_opt: f64,
    #[serde(default = "default_option")]
    pub option: crate::strategy::PhaseOption,
    #[serde(default = "default_mass_tolerance")]
    pub mass_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_cap: Option<usize>,
}

fn default_epsilon() -> f64 {
    StrategyConfig::default().epsilon_opt
}

fn default_option() -> crate::strategy::PhaseOption {
    StrategyConfig::default().option
}

fn default_mass_tolerance() -> f64 {
    StrategyConfig::default().mass_tolerance
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            epsilon_opt: default_epsilon(),
            option: default_option(),
            mass_tolerance: default_mass_tolerance(),
            horizon_cap: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: GridSection,
    pub red: RedSection,
    pub blue: BlueSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub sim: SimSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Copy with every defaulted value written out.
    pub fn resolved(&self) -> Self {
        let bins: usize = self.grid.dims.iter().product();
        let mut out = self.clone();
        out.strategy.horizon_cap.get_or_insert(50 * bins);
        out.sim.max_steps.get_or_insert(50 * bins);
        out
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let dims = self.grid.dims.clone();
        let probe = GridSpec::new(dims.clone(), BTreeSet::new(), BTreeSet::from([0]))?;
        let base = boxed(&probe, &self.grid.base, "grid.base")?;
        let mut obstacles = BTreeSet::new();
        for (k, b) in self.grid.obstacles.iter().enumerate() {
            obstacles.extend(boxed(&probe, b, &format!("grid.obstacles[{k}]"))?);
        }
        Ok(GridSpec::new(dims, obstacles, base)?)
    }

    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let resolved = self.resolved();
        let grid = self.grid_spec()?;
        let m = grid.num_bins();
        let red_init = region_bins(&grid, &self.red.init, "red.init")?;
        let blue_init = region_bins(&grid, &self.blue.init, "blue.init")?;
        let v_b = match self.red.v_b {
            BaseDistribution::Uniform => DensityVector::uniform_over(m, grid.base_bins())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        };
        let s = &resolved.strategy;
        let strategy = StrategyConfig {
            epsilon_opt: s.epsilon_opt,
            option: s.option,
            mass_tolerance: s.mass_tolerance,
            horizon_cap: s.horizon_cap,
        };
        strategy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(ScenarioConfig {
            grid,
            red_count: self.red.count,
            red_init,
            v_b,
            blue_count: self.blue.count,
            blue_init,
            strategy,
            max_steps: resolved.sim.max_steps.unwrap_or(50 * m),
            seed: self.sim.seed,
        })
    }
}

fn boxed(grid: &GridSpec, b: &BoxSpec, what: &str) -> Result<BTreeSet<usize>, ConfigError> {
    let axes = grid.dims().len();
    if b.min.len() != axes || b.max.len() != axes {
        return Err(ConfigError::Invalid(format!("{what}: box needs {axes} coordinates")));
    }
    for axis in 0..axes {
        if b.min[axis] > b.max[axis] || b.max[axis] >= grid.dims()[axis] {
            return Err(ConfigError::Invalid(format!(
                "{what}: axis {axis} range {}..={} outside 0..{}",
                b.min[axis],
                b.max[axis],
                grid.dims()[axis]
            )));
        }
    }
    Ok(grid.box_bins(&b.min, &b.max)?)
}

fn region_bins(grid: &GridSpec, region: &Region, what: &str) -> Result<BTreeSet<usize>, ConfigError> {
    let bins = match region {
        Region::Keyword(RegionKeyword::Base) => grid.base_bins().clone(),
        Region::Keyword(RegionKeyword::UniformOutsideBase) => grid
            .free_bins()
            .filter(|b| !grid.base_bins().contains(b))
            .collect(),
        Region::Box(b) => boxed(grid, b, what)?,
        Region::Boxes(list) => {
            let mut bins = BTreeSet::new();
            for (k, b) in list.iter().enumerate() {
                bins.extend(boxed(grid, b, &format!("{what}[{k}]"))?);
            }
            bins
        }
    };
    if let Some(&bin) = bins.iter().find(|&&b| grid.is_obstacle(b)) {
        return Err(ConfigError::Invalid(format!("{what}: region covers obstacle bin {bin}")));
    }
    if bins.is_empty() {
        return Err(ConfigError::Invalid(format!("{what}: region is empty")));
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::PhaseOption;

    const SMALL: &str = r#"
[grid]
dims = [4, 4]
obstacles = [{ min = [2, 1], max = [2, 2] }]
base = { min = [0, 0], max = [0, 1] }

[red]
count = 10
init = "uniform_outside_base"

[blue]
count = 5
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ConfigFile::parse(SMALL).unwrap();
        let s = cfg.scenario().unwrap();
        assert_eq!(s.grid.obstacles(), &BTreeSet::from([9, 10]));
        assert_eq!(s.grid.base_bins(), &BTreeSet::from([0, 1]));
        assert_eq!(s.blue_init, BTreeSet::from([0, 1]));
        assert_eq!(s.red_init.len(), 12);
        assert_eq!(s.max_steps, 800);
        assert_eq!(s.strategy.horizon_cap, Some(800));
        assert_eq!(s.strategy.option, PhaseOption::Freeze);
        assert_eq!(s.v_b.values()[..2], [0.5, 0.5]);
    }

    #[test]
    fn resolved_round_trip() {
        let cfg = ConfigFile::parse(SMALL).unwrap();
        let text = cfg.resolved().to_toml();
        let again = ConfigFile::parse(&text).unwrap();
        assert_eq!(again, cfg.resolved());
        assert_eq!(again.scenario().unwrap(), cfg.scenario().unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ConfigFile::parse("[grid]\ndims = [2]"), Err(ConfigError::Parse(_))));
        let unknown = SMALL.replace("[blue]", "[blue]\nspeed = 3");
        assert!(matches!(ConfigFile::parse(&unknown), Err(ConfigError::Parse(_))));
        let outside = SMALL.replace("max = [0, 1] }", "max = [0, 4] }");
        assert!(matches!(
            ConfigFile::parse(&outside).unwrap().scenario(),
            Err(ConfigError::Invalid(_))
        ));
        let on_obstacle = SMALL.replace("\"uniform_outside_base\"", "{ min = [2, 0], max = [3, 3] }");
        assert!(matches!(
            ConfigFile::parse(&on_obstacle).unwrap().scenario(),
            Err(ConfigError::Invalid(_))
        ));
        let bad_eps = format!("{SMALL}\n[strategy]\nepsilon_opt = 1.5\n");
        assert!(ConfigFile::parse(&bad_eps).unwrap().scenario().is_err());
    }

    #[test]
    fn box_regions_and_options() {
        let text = format!(
            "{}\n[strategy]\noption = \"replan\"\n\n[sim]\nseed = 9\nmax_steps = 12\n",
            SMALL.replace("\"uniform_outside_base\"", "{ min = [3, 3], max = [3, 3] }")
        );
        let s = ConfigFile::parse(&text).unwrap().scenario().unwrap();
        assert_eq!(s.red_init, BTreeSet::from([15]));
        let union = SMALL.replace(
            "\"uniform_outside_base\"",
            "[{ min = [3, 0], max = [3, 3] }, { min = [0, 3], max = [3, 3] }]",
        );
        let u = ConfigFile::parse(&union).unwrap().scenario().unwrap();
        assert_eq!(u.red_init, BTreeSet::from([3, 7, 11, 12, 13, 14, 15]));
        assert_eq!(s.strategy.option, PhaseOption::Replan);
        assert_eq!((s.seed, s.max_steps), (9, 12));
    }
}
