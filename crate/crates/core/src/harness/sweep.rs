use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{AgentKind, AgentSpec, ExperimentConfig, SweepGrid};
use super::metrics::RunMetrics;
use super::output::{write_outputs, OutputFiles};
use super::run::run_all;
use crate::envgen::GenConfig;
use crate::error::{Error, Result};

/// One `(A, H)` slice of a sweep, run once for all `zeta` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSlice {
    pub num_actions: usize,
    pub horizon: usize,
    pub zetas: Vec<u32>,
    /// Agents with fixed-model `ucb_f` entries expanded once per `zeta`.
    pub config: ExperimentConfig,
}

/// Outputs of one `(A, H, zeta)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub num_actions: usize,
    pub horizon: usize,
    pub zeta: u32,
    pub config: ExperimentConfig,
    pub metrics: Vec<RunMetrics>,
}

impl CellResult {
    pub fn dir_name(&self) -> String {
        cell_dir_name(self.num_actions, self.horizon, self.zeta)
    }

    pub fn title(&self) -> String {
        format!("S={}, A={}, H={}, zeta={}", self.config.gen.num_states, self.num_actions, self.horizon, self.zeta)
    }

    /// Runs of the agent with the given label.
    pub fn agent(&self, label: &str) -> Vec<&RunMetrics> {
        self.metrics.iter().filter(|m| m.agent == label).collect()
    }
}

pub fn cell_dir_name(num_actions: usize, horizon: usize, zeta: u32) -> String {
    format!("A{num_actions}_H{horizon}_zeta{zeta}")
}

fn with_zeta(agent: &AgentSpec, zeta: u32) -> AgentSpec {
    let mut a = agent.clone();
    a.zeta = zeta;
    if let Some(name) = &agent.name {
        a.name = Some(format!("{name}(zeta={zeta})"));
    }
    a
}

/// Expands the grid of `cfg` into `(A, H)` slices. Without a grid the
/// configuration is a single slice at its own `A`, `H` and agent `zeta`s.
pub fn plan_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepSlice>> {
    cfg.validate()?;
    let Some(grid) = &cfg.sweep else {
        let mut zetas: Vec<u32> = cfg.agents.iter().filter(|a| a.takes_zeta()).map(|a| a.zeta).collect();
        zetas.sort_unstable();
        zetas.dedup();
        if zetas.is_empty() {
            zetas.push(0);
        }
        return Ok(vec![SweepSlice {
            num_actions: cfg.gen.num_actions,
            horizon: cfg.gen.horizon,
            zetas,
            config: ExperimentConfig { sweep: None, ..cfg.clone() },
        }]);
    };
    let mut slices = Vec::new();
    for &num_actions in &grid.num_actions {
        for &horizon in &grid.horizons {
            let mut agents = Vec::new();
            for agent in &cfg.agents {
                if agent.takes_zeta() {
                    agents.extend(grid.zetas.iter().map(|&z| with_zeta(agent, z)));
                } else {
                    agents.push(agent.clone());
                }
            }
            let mut gen = cfg.gen;
            gen.num_actions = num_actions;
            gen.horizon = horizon;
            let config = ExperimentConfig {
                gen,
                agents,
                sweep: None,
                ..cfg.clone()
            };
            config.validate()?;
            slices.push(SweepSlice {
                num_actions,
                horizon,
                zetas: grid.zetas.clone(),
                config,
            });
        }
    }
    Ok(slices)
}

/// Splits the metrics of a slice into its `zeta` cells. Each cell keeps the
/// `ucb_f` entries with that `zeta` and every agent that ignores `zeta`.
pub fn split_cells(slice: &SweepSlice, metrics: &[RunMetrics]) -> Vec<CellResult> {
    slice
        .zetas
        .iter()
        .map(|&zeta| {
            let agents: Vec<AgentSpec> = slice
                .config
                .agents
                .iter()
                .filter(|a| !a.takes_zeta() || a.zeta == zeta)
                .cloned()
                .collect();
            let labels: Vec<String> = agents.iter().map(AgentSpec::label).collect();
            let metrics = metrics.iter().filter(|m| labels.contains(&m.agent)).cloned().collect();
            CellResult {
                num_actions: slice.num_actions,
                horizon: slice.horizon,
                zeta,
                config: ExperimentConfig {
                    agents,
                    ..slice.config.clone()
                },
                metrics,
            }
        })
        .collect()
}

/// Runs every slice of the sweep and returns one result per cell, ordered
/// by `A`, then `H`, then `zeta`.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<CellResult>> {
    let mut cells = Vec::new();
    for slice in plan_sweep(cfg)? {
        let metrics = run_all(&slice.config, threads)?;
        cells.extend(split_cells(&slice, &metrics));
    }
    Ok(cells)
}

/// Writes each cell into its own subdirectory of `root`.
pub fn write_sweep(cells: &[CellResult], root: &Path) -> Result<Vec<(PathBuf, OutputFiles)>> {
    if cells.is_empty() {
        return Err(Error::Argument("sweep produced no cells".into()));
    }
    cells
        .iter()
        .map(|cell| {
            let dir = root.join(cell.dir_name());
            let files = write_outputs(&cell.metrics, &cell.config, &dir, &cell.title())?;
            Ok((dir, files))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 10 runs of 2000 episodes.
    Small,
    /// 50 runs of 5000 episodes.
    Paper,
}

impl Scale {
    pub fn num_runs(self) -> usize {
        match self {
            Scale::Small => 10,
            Scale::Paper => 50,
        }
    }

    pub fn episodes(self) -> usize {
        match self {
            Scale::Small => 2000,
            Scale::Paper => 5000,
        }
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Scale::Small),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::Argument(format!("unknown scale {other:?}; expected small or paper"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Small => "small",
            Scale::Paper => "paper",
        })
    }
}

pub const FIGURE1_NUM_STATES: usize = 25;
pub const FIGURE1_SUPPORT_MAX: usize = 5;
pub const FIGURE1_ACTIONS: [usize; 3] = [2, 4, 8];
pub const FIGURE1_HORIZONS: [usize; 2] = [5, 10];
pub const FIGURE1_ZETAS: [u32; 3] = [0, 2, 4];

/// The agents of the reference comparison: `ucb_f` with the empirical
/// bonus, `ucb_h`, `ucbvi` and the reward-greedy policy.
pub fn figure1_agents() -> Vec<AgentSpec> {
    vec![
        AgentSpec::ucb_f(0),
        AgentSpec::new(AgentKind::UcbH),
        AgentSpec::new(AgentKind::Ucbvi),
        AgentSpec::new(AgentKind::RewardGreedy),
    ]
}

/// Full grid `S = 25`, `W = 5`, `A` in {2, 4, 8}, `H` in {5, 10},
/// `zeta` in {0, 2, 4} with `c = 0.05` and `L = 0.25`.
pub fn figure1_config(scale: Scale, master_seed: u64) -> ExperimentConfig {
    let gen = GenConfig::new(FIGURE1_NUM_STATES, FIGURE1_ACTIONS[0], FIGURE1_HORIZONS[0], FIGURE1_SUPPORT_MAX);
    let mut cfg = ExperimentConfig::new(gen, figure1_agents(), scale.episodes(), scale.num_runs()).with_seed(master_seed);
    cfg.sweep = Some(SweepGrid {
        num_actions: FIGURE1_ACTIONS.to_vec(),
        horizons: FIGURE1_HORIZONS.to_vec(),
        zetas: FIGURE1_ZETAS.to_vec(),
    });
    cfg
}
