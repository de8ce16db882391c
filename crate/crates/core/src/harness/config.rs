use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envgen::GenConfig;
use crate::error::{Error, Result};
use crate::ucbf::{BonusConstants, BonusSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    UcbF,
    UcbH,
    Ucbvi,
    RewardGreedy,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::UcbF => "ucb_f",
            AgentKind::UcbH => "ucb_h",
            AgentKind::Ucbvi => "ucbvi",
            AgentKind::RewardGreedy => "reward_greedy",
        })
    }
}

fn default_schedule() -> BonusSchedule {
    BonusSchedule::Empirical
}

fn default_c() -> f64 {
    BonusConstants::default().c
}

fn default_p() -> f64 {
    BonusConstants::default().p
}

fn default_d() -> f64 {
    BonusConstants::default().d
}

fn default_lipschitz() -> f64 {
    0.25
}

/// One agent entry of an experiment.
///
/// Fields other than `kind` only matter where they apply: `c` is shared by
/// all learners, the rest is read by `ucb_f` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_schedule")]
    pub schedule: BonusSchedule,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_lipschitz")]
    pub lipschitz: f64,
    /// Replace `lipschitz` by the tightest constant of the true `V*`. This
    /// gives the agent oracle information and is meant for analysis runs.
    #[serde(default)]
    pub lipschitz_from_oracle: bool,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_d")]
    pub d: f64,
    /// Even error budget of the corrupted model handed to `ucb_f`.
    #[serde(default)]
    pub zeta: u32,
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        AgentSpec {
            kind,
            name: None,
            schedule: default_schedule(),
            c: default_c(),
            lipschitz: default_lipschitz(),
            lipschitz_from_oracle: false,
            p: default_p(),
            d: default_d(),
            zeta: 0,
        }
    }

    pub fn ucb_f(zeta: u32) -> Self {
        AgentSpec {
            zeta,
            ..Self::new(AgentKind::UcbF)
        }
    }

    pub fn with_schedule(mut self, schedule: BonusSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn constants(&self) -> BonusConstants {
        BonusConstants {
            c: self.c,
            lipschitz: self.lipschitz,
            p: self.p,
            d: self.d,
        }
    }

    /// Whether a sweep over `zeta` applies to this agent.
    pub fn takes_zeta(&self) -> bool {
        self.kind == AgentKind::UcbF && self.schedule != BonusSchedule::Online
    }

    /// Label used in CSV rows and chart legends.
    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match (self.kind, self.schedule) {
            (AgentKind::UcbF, BonusSchedule::Empirical) => format!("ucb_f(zeta={})", self.zeta),
            (AgentKind::UcbF, BonusSchedule::Theory) => format!("ucb_f(theory,zeta={})", self.zeta),
            (AgentKind::UcbF, BonusSchedule::Online) => format!("ucb_f(online,d={})", self.d),
            (kind, _) => kind.to_string(),
        }
    }
}

/// Grid swept by the `sweep` command; `zetas` applies to every `ucb_f`
/// agent with a fixed model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub num_actions: Vec<usize>,
    pub horizons: Vec<usize>,
    pub zetas: Vec<u32>,
}

fn one() -> usize {
    1
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gen: GenConfig,
    pub agents: Vec<AgentSpec>,
    /// Episodes per run, `K`.
    pub episodes: usize,
    /// Independent simulations per curve; each draws a fresh MDP.
    pub num_runs: usize,
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

impl ExperimentConfig {
    pub fn new(gen: GenConfig, agents: Vec<AgentSpec>, episodes: usize, num_runs: usize) -> Self {
        ExperimentConfig {
            gen,
            agents,
            episodes,
            num_runs,
            eval_every: 1,
            master_seed: 0,
            output_dir: None,
            sweep: None,
        }
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.num_runs == 0 {
            return Err(Error::Config("num_runs must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("no agents configured".into()));
        }
        let mut seen = HashSet::new();
        for agent in &self.agents {
            if !seen.insert(agent.label()) {
                return Err(Error::Config(format!("duplicate agent label {:?}", agent.label())));
            }
            if agent.zeta % 2 != 0 {
                return Err(Error::Config(format!("{}: zeta must be even", agent.label())));
            }
            if agent.kind != AgentKind::RewardGreedy && !(agent.c.is_finite() && agent.c > 0.0) {
                return Err(Error::Config(format!("{}: c must be positive", agent.label())));
            }
        }
        if let Some(grid) = &self.sweep {
            if grid.num_actions.is_empty() || grid.horizons.is_empty() || grid.zetas.is_empty() {
                return Err(Error::Config("sweep grid axes must be nonempty".into()));
            }
            if let Some(z) = grid.zetas.iter().find(|&&z| z % 2 != 0) {
                return Err(Error::Config(format!("sweep zeta {z} must be even")));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all representable in TOML")
    }
}
