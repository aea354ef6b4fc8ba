//! Experiment configuration documents.
//!
//! A config is one TOML document: top-level `kind`, `seed`, optional
//! `threads` and `output_dir`, plus exactly one table holding the
//! parameters of that kind. Unknown keys are rejected everywhere.

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mg_core::offload::OffloadConfig;
use mg_core::strategy::StrategySpace;
use mg_core::variants::{CommonStrategy, EmgConfig, GcmgConfig, GeneInit, MutationRule, SimplexConfig};
use mg_core::{GameConfig, MgError, ScoringRule, Strategy};
use serde::{Deserialize, Serialize};

pub const DEFAULT_OUTPUT_DIR: &str = "mg-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Basic,
    Emg,
    Gcmg,
    Simplex,
    Offload,
    PhaseScan,
    EquilibriumReport,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Basic => "basic",
            Kind::Emg => "emg",
            Kind::Gcmg => "gcmg",
            Kind::Simplex => "simplex",
            Kind::Offload => "offload",
            Kind::PhaseScan => "phase-scan",
            Kind::EquilibriumReport => "equilibrium-report",
        }
    }

    /// Name of the parameter table this kind reads.
    pub fn table(self) -> &'static str {
        match self {
            Kind::PhaseScan => "phase_scan",
            Kind::EquilibriumReport => "equilibrium",
            other => other.as_str(),
        }
    }
}

/// `threads` and `output_dir` are execution details: they are not echoed
/// into outputs, so changing them never changes a byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basic: Option<BasicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emg: Option<EmgSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gcmg: Option<GcmgSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplex: Option<SimplexSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offload: Option<OffloadSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_scan: Option<PhaseScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSection>,
}

fn default_strategies() -> usize {
    2
}
fn default_rounds() -> usize {
    10_000
}
fn default_burn_in() -> usize {
    mg_core::metrics::DEFAULT_BURN_IN
}
fn default_runs() -> usize {
    32
}
fn default_memories() -> Vec<u32> {
    (1..=10).collect()
}
fn default_common_strategy() -> String {
    "follow-last-winner".into()
}
fn default_exact_tolerance() -> f64 {
    1e-12
}
fn default_sigmas() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasicSection {
    pub agents: usize,
    pub memory: u32,
    #[serde(default = "default_strategies")]
    pub strategies_per_agent: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub strategy_space: StrategySpace,
    #[serde(default)]
    pub scoring: ScoringRule,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcmgSection {
    pub agents: usize,
    pub memory: u32,
    /// Agents sit out while their best score is below this.
    pub threshold: f64,
    #[serde(default = "default_strategies")]
    pub strategies_per_agent: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub strategy_space: StrategySpace,
    #[serde(default)]
    pub scoring: ScoringRule,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmgSection {
    pub agents: usize,
    pub memory: u32,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Mutation threshold d; omit to disable mutation.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub cutoff: Option<f64>,
    /// `follow-last-winner` or a prediction table as a bit string indexed
    /// by history (length 2^memory).
    #[serde(default = "default_common_strategy")]
    pub common_strategy: String,
    #[serde(default)]
    pub mutation: MutationRule,
    #[serde(default)]
    pub initial_genes: GeneInit,
    #[serde(default)]
    pub snapshot_interval: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplexSection {
    pub agents: usize,
    pub choices: u32,
    pub memory: u32,
    pub learning_rate: f64,
    #[serde(default = "default_strategies")]
    pub strategies_per_agent: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffloadSection {
    pub users: usize,
    /// Cycles per task (M).
    pub task_cycles: f64,
    /// Small-cell base station capacity in cycles/s (C_b).
    pub sbs_capacity: f64,
    /// Device capacity in cycles/s (C_u).
    pub device_capacity: f64,
    #[serde(default = "default_memories")]
    pub memories: Vec<u32>,
    #[serde(default = "default_strategies")]
    pub strategies_per_agent: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub strategy_space: StrategySpace,
    #[serde(default)]
    pub scoring: ScoringRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseScanSection {
    pub agents: usize,
    #[serde(default = "default_memories")]
    pub memories: Vec<u32>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_strategies")]
    pub strategies_per_agent: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub strategy_space: StrategySpace,
    #[serde(default)]
    pub scoring: ScoringRule,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    pub agents: usize,
    /// Allowed payoff gap when payoffs are computed exactly.
    #[serde(default = "default_exact_tolerance")]
    pub exact_tolerance: f64,
    /// Allowed gap in standard errors when payoffs are sampled.
    #[serde(default = "default_sigmas")]
    pub monte_carlo_sigmas: f64,
}

/// Reads a config from `path`, or from stdin when `path` is `-`.
pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .context("reading config from stdin")?;
        s
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?
    };
    parse(&text)
}

/// Parses and fully validates a config document.
pub fn parse(text: &str) -> anyhow::Result<ExperimentConfig> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {}", e.to_string().trim_end()))?;
    config.validate()?;
    Ok(config)
}

/// Rewrites a core parameter error so it names the config key.
fn keyed(table: &'static str, rename: &'static [(&'static str, &'static str)]) -> impl Fn(MgError) -> anyhow::Error {
    move |e| match e {
        MgError::InvalidParameter { name, reason } => {
            let key = rename
                .iter()
                .find(|(from, _)| *from == name)
                .map_or(name, |(_, to)| *to);
            anyhow::anyhow!("invalid `{table}.{key}`: {reason}")
        }
        other => other.into(),
    }
}

fn check_burn_in(table: &str, burn_in: usize, rounds: usize) -> anyhow::Result<()> {
    if burn_in >= rounds {
        bail!("invalid `{table}.burn_in`: must be smaller than rounds ({rounds}), got {burn_in}");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        let present = [
            ("basic", self.basic.is_some()),
            ("emg", self.emg.is_some()),
            ("gcmg", self.gcmg.is_some()),
            ("simplex", self.simplex.is_some()),
            ("offload", self.offload.is_some()),
            ("phase_scan", self.phase_scan.is_some()),
            ("equilibrium", self.equilibrium.is_some()),
        ];
        let wanted = self.kind.table();
        for (table, here) in present {
            if here && table != wanted {
                bail!("table [{table}] does not apply to kind = \"{}\"", self.kind.as_str());
            }
        }
        if !present.iter().any(|&(t, here)| here && t == wanted) {
            bail!("missing table [{wanted}] required by kind = \"{}\"", self.kind.as_str());
        }
        if self.threads == Some(0) {
            bail!("invalid `threads`: must be at least 1");
        }
        match self.kind {
            Kind::Basic => {
                let s = self.basic.as_ref().expect("checked above");
                self.basic_game()?.validate().map_err(keyed("basic", &[]))?;
                check_burn_in("basic", s.burn_in, s.rounds)?;
            }
            Kind::Gcmg => {
                let s = self.gcmg.as_ref().expect("checked above");
                self.gcmg_config()?.validate().map_err(keyed("gcmg", &[]))?;
                check_burn_in("gcmg", s.burn_in, s.rounds)?;
            }
            Kind::Emg => {
                let s = self.emg.as_ref().expect("checked above");
                let cfg = self.emg_config()?;
                cfg.validate().map_err(keyed("emg", &[]))?;
                cfg.common_strategy.resolve(cfg.memory).map_err(keyed("emg", &[]))?;
                check_burn_in("emg", s.burn_in, s.rounds)?;
            }
            Kind::Simplex => {
                let s = self.simplex.as_ref().expect("checked above");
                self.simplex_config()?.validate().map_err(keyed("simplex", &[]))?;
                check_burn_in("simplex", s.burn_in, s.rounds)?;
            }
            Kind::Offload => {
                self.offload_config()?
                    .validate()
                    .map_err(keyed("offload", &[("agents", "users")]))?;
            }
            Kind::PhaseScan => {
                let s = self.phase_scan.as_ref().expect("checked above");
                if s.memories.is_empty() {
                    bail!("invalid `phase_scan.memories`: need at least one brain size");
                }
                if s.runs == 0 {
                    bail!("invalid `phase_scan.runs`: at least one run per brain size");
                }
                for &m in &s.memories {
                    self.scan_base(m)?.validate().map_err(keyed("phase_scan", &[]))?;
                }
                check_burn_in("phase_scan", s.burn_in, s.rounds)?;
            }
            Kind::EquilibriumReport => {
                let s = self.equilibrium.as_ref().expect("checked above");
                mg_core::equilibrium::StageGame::new(s.agents).map_err(keyed("equilibrium", &[]))?;
                if !(s.exact_tolerance >= 0.0 && s.monte_carlo_sigmas > 0.0) {
                    bail!("invalid `equilibrium`: tolerances must be non-negative and sigmas positive");
                }
            }
        }
        Ok(())
    }

    pub fn basic_game(&self) -> anyhow::Result<GameConfig> {
        let s = self.basic.as_ref().context("missing table [basic]")?;
        let seed = mg_core::seed::derive_seed(self.seed, ["basic"]);
        Ok(game_config(
            s.agents,
            s.memory,
            s.strategies_per_agent,
            s.rounds,
            s.cutoff,
            s.strategy_space,
            s.scoring,
            seed,
        ))
    }

    pub fn gcmg_config(&self) -> anyhow::Result<GcmgConfig> {
        let s = self.gcmg.as_ref().context("missing table [gcmg]")?;
        let seed = mg_core::seed::derive_seed(self.seed, ["gcmg"]);
        Ok(GcmgConfig {
            game: game_config(
                s.agents,
                s.memory,
                s.strategies_per_agent,
                s.rounds,
                s.cutoff,
                s.strategy_space,
                s.scoring,
                seed,
            ),
            threshold: s.threshold,
        })
    }

    pub fn emg_config(&self) -> anyhow::Result<EmgConfig> {
        let s = self.emg.as_ref().context("missing table [emg]")?;
        Ok(EmgConfig {
            agents: s.agents,
            memory: s.memory,
            rounds: s.rounds,
            threshold: s.threshold.unwrap_or(f64::INFINITY),
            cutoff: s.cutoff,
            common_strategy: parse_common_strategy(&s.common_strategy)?,
            mutation: s.mutation,
            initial_genes: s.initial_genes,
            snapshot_interval: s.snapshot_interval,
            seed: mg_core::seed::derive_seed(self.seed, ["emg"]),
        })
    }

    pub fn simplex_config(&self) -> anyhow::Result<SimplexConfig> {
        let s = self.simplex.as_ref().context("missing table [simplex]")?;
        Ok(SimplexConfig {
            agents: s.agents,
            choices: s.choices,
            memory: s.memory,
            strategies_per_agent: s.strategies_per_agent,
            rounds: s.rounds,
            learning_rate: s.learning_rate,
            seed: mg_core::seed::derive_seed(self.seed, ["simplex"]),
        })
    }

    pub fn offload_config(&self) -> anyhow::Result<OffloadConfig> {
        let s = self.offload.as_ref().context("missing table [offload]")?;
        Ok(OffloadConfig {
            users: s.users,
            task_cycles: s.task_cycles,
            sbs_capacity: s.sbs_capacity,
            device_capacity: s.device_capacity,
            memories: s.memories.clone(),
            strategies_per_agent: s.strategies_per_agent,
            rounds: s.rounds,
            runs: s.runs,
            burn_in: s.burn_in,
            strategy_space: s.strategy_space,
            scoring: s.scoring,
            seed: self.seed,
        })
    }

    /// Base game of the phase scan at brain size `memory`; the scan
    /// replaces the seed per run.
    pub fn scan_base(&self, memory: u32) -> anyhow::Result<GameConfig> {
        let s = self.phase_scan.as_ref().context("missing table [phase_scan]")?;
        Ok(game_config(
            s.agents,
            memory,
            s.strategies_per_agent,
            s.rounds,
            s.cutoff,
            s.strategy_space,
            s.scoring,
            0,
        ))
    }
}

#[allow(clippy::too_many_arguments)]
fn game_config(
    agents: usize,
    memory: u32,
    strategies: usize,
    rounds: usize,
    cutoff: Option<f64>,
    space: StrategySpace,
    scoring: ScoringRule,
    seed: u64,
) -> GameConfig {
    let mut cfg = GameConfig::new(agents, memory, strategies, rounds, seed)
        .with_strategy_space(space)
        .with_scoring(scoring);
    cfg.cutoff = cutoff;
    cfg
}

fn parse_common_strategy(text: &str) -> anyhow::Result<CommonStrategy> {
    if text == "follow-last-winner" {
        return Ok(CommonStrategy::FollowLastWinner);
    }
    let table = text
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            _ => Err(anyhow::anyhow!(
                "invalid `emg.common_strategy`: expected \"follow-last-winner\" or a bit string, got {text:?}"
            )),
        })
        .collect::<anyhow::Result<Vec<u8>>>()?;
    let strategy = Strategy::from_table(table).map_err(keyed("emg", &[("strategy", "common_strategy")]))?;
    Ok(CommonStrategy::Table(strategy))
}
