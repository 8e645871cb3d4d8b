use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pricing_audit::market::{DemandOracle, DiscreteValuationTable, TableDemand, UniformDemand, UniformDuopoly};
use pricing_audit::rational;
use pricing_audit::sellers::{FeedbackMode, QConfig, StrategySpec};
use pricing_audit::transcript::{AuditConfig, CostRange, PriceGrid};

pub const DESK_ROUNDS: usize = 200_000;
pub const DESK_REPLICATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// Valuations uniform on `[0,1]²`.
    Uniform {
        #[serde(default = "default_uniform_costs")]
        costs: [f64; 2],
        /// Price levels; the 19-level grid `0.05 … 0.95` when absent.
        #[serde(default)]
        grid: Option<Vec<f64>>,
    },
    /// A discrete valuation table with zero costs: the built-in manipulation
    /// game at `epsilon`, or a table file.
    Table {
        #[serde(default = "default_epsilon")]
        epsilon: String,
        #[serde(default)]
        path: Option<PathBuf>,
    },
}

fn default_uniform_costs() -> [f64; 2] {
    [0.1, 0.2]
}

fn default_epsilon() -> String {
    "1/100".into()
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec::Uniform { costs: default_uniform_costs(), grid: None }
    }
}

pub struct Market {
    pub oracle: Box<dyn DemandOracle>,
    pub costs: [f64; 2],
}

impl EnvironmentSpec {
    pub fn build(&self) -> Result<Market> {
        match self {
            EnvironmentSpec::Uniform { costs, grid } => {
                let env = UniformDuopoly::new(costs[0], costs[1])?;
                let grid = match grid {
                    Some(levels) => PriceGrid::new(levels.clone(), None).context("environment.grid")?,
                    None => PriceGrid::twentieths(),
                };
                Ok(Market { oracle: Box::new(UniformDemand::new(&env, grid)?), costs: *costs })
            }
            EnvironmentSpec::Table { epsilon, path } => {
                let table = match path {
                    Some(p) => {
                        let text = fs::read_to_string(p).with_context(|| format!("reading table {}", p.display()))?;
                        DiscreteValuationTable::from_json(&text)?
                    }
                    None => {
                        let eps = rational::parse(epsilon)
                            .with_context(|| format!("environment.epsilon: cannot parse {epsilon:?}"))?;
                        DiscreteValuationTable::table3(eps)?
                    }
                };
                Ok(Market { oracle: Box::new(TableDemand::new(&table)), costs: [0.0, 0.0] })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSettings {
    #[serde(default = "default_cost_lo")]
    pub cost_lo: f64,
    #[serde(default = "default_cost_hi")]
    pub cost_hi: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub endogenous: bool,
    #[serde(default)]
    pub h: Option<f64>,
}

fn default_cost_lo() -> f64 {
    0.1
}
fn default_cost_hi() -> f64 {
    0.9
}
pub fn default_r() -> f64 {
    0.006
}
pub fn default_alpha() -> f64 {
    0.05
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            cost_lo: default_cost_lo(),
            cost_hi: default_cost_hi(),
            r: default_r(),
            alpha: default_alpha(),
            endogenous: false,
            h: None,
        }
    }
}

impl AuditSettings {
    pub fn to_config(&self) -> Result<AuditConfig> {
        let range = CostRange::new(self.cost_lo, self.cost_hi).context("audit cost range")?;
        Ok(AuditConfig::new(range, self.r, self.alpha, self.endogenous)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub environment: EnvironmentSpec,
    #[serde(default = "default_sellers")]
    pub sellers: [StrategySpec; 2],
    /// Horizon; defaults to a manipulator's schedule length, else the desk-scale horizon.
    #[serde(default)]
    pub rounds: Option<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub feedback: FeedbackMode,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub audit: AuditSettings,
}

fn default_sellers() -> [StrategySpec; 2] {
    [StrategySpec::Q(QConfig::default()), StrategySpec::Q(QConfig::default())]
}

fn default_replications() -> usize {
    DESK_REPLICATIONS
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            environment: EnvironmentSpec::default(),
            sellers: default_sellers(),
            rounds: None,
            replications: default_replications(),
            seed: 0,
            feedback: FeedbackMode::Expected,
            out: default_out(),
            audit: AuditSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Two Q-learners in the uniform duopoly.
    Duopoly,
    /// A two-phase manipulator against a Hedge learner in the discrete game.
    Manipulation,
}

pub const MANIPULATION_PHASE1: usize = 10_000;
pub const MANIPULATION_ETA: f64 = 0.5;

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Duopoly => Self::default(),
            Preset::Manipulation => ExperimentConfig {
                environment: EnvironmentSpec::Table { epsilon: default_epsilon(), path: None },
                sellers: [
                    StrategySpec::Manipulator {
                        phase1_rounds: MANIPULATION_PHASE1,
                        phase1_price: 1.0,
                        phase2_price: 3.0,
                        phase2_rounds: None,
                    },
                    StrategySpec::Mwu { eta: MANIPULATION_ETA },
                ],
                replications: 1,
                audit: AuditSettings { cost_lo: 0.0, cost_hi: 0.5, r: 0.1, ..AuditSettings::default() },
                ..Self::default()
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn rounds(&self) -> usize {
        self.rounds
            .or_else(|| self.sellers.iter().find_map(StrategySpec::total_rounds))
            .unwrap_or(DESK_ROUNDS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            bail!("config field `replications` must be at least 1");
        }
        if self.rounds == Some(0) {
            bail!("config field `rounds` must be at least 1");
        }
        self.audit.to_config()?;
        Ok(())
    }
}
