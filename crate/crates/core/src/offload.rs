//! Computation offloading to a shared small-cell base station, played as a
//! minority game with cut-off `phi = C_b / C_u`.
//!
//! Latencies are computed in seconds; report fields suffixed `_ms` are
//! milliseconds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::ScoringRule;
use crate::equilibrium::random_choice_game;
use crate::error::{MgError, Result};
use crate::game::{run_game, GameConfig, GameTrace};
use crate::metrics::{mean_and_stderr, minimum_row, phase_rows, run_grid, summarize, PhaseScanRow, DEFAULT_BURN_IN};
use crate::seed::{derive_seed, seeded_rng};
use crate::strategy::StrategySpace;

pub fn cutoff_from_capacities(sbs_capacity: f64, device_capacity: f64) -> Result<f64> {
    if device_capacity.is_nan() || device_capacity <= 0.0 {
        return Err(MgError::invalid("device_capacity", "C_u must be positive"));
    }
    Ok(sbs_capacity / device_capacity)
}

/// Latency seen by each of `n` offloading users sharing the SBS.
pub fn offload_latency(offloading: u32, task_cycles: f64, sbs_capacity: f64) -> f64 {
    f64::from(offloading) * task_cycles / sbs_capacity
}

/// Latency of local execution, which is also the tolerable threshold.
pub fn local_latency(task_cycles: f64, device_capacity: f64) -> Result<f64> {
    if device_capacity.is_nan() || device_capacity <= 0.0 {
        return Err(MgError::invalid("device_capacity", "C_u must be positive"));
    }
    Ok(task_cycles / device_capacity)
}

/// Broadcast bit: 1 when offloaders are the winning minority.
pub fn control_bit(offloading: u32, cutoff: f64) -> u8 {
    u8::from(f64::from(offloading) < cutoff)
}

/// `(U_o, U_l)` for the round.
pub fn utilities(offloading: u32, cutoff: f64) -> (u8, u8) {
    let b = control_bit(offloading, cutoff);
    (b, 1 - b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadConfig {
    pub users: usize,
    /// `M`, CPU cycles per task.
    pub task_cycles: f64,
    /// `C_b`, SBS cycles per second.
    pub sbs_capacity: f64,
    /// `C_u`, device cycles per second.
    pub device_capacity: f64,
    pub memories: Vec<u32>,
    pub strategies_per_agent: usize,
    pub rounds: usize,
    pub runs: usize,
    pub burn_in: usize,
    pub strategy_space: StrategySpace,
    pub scoring: ScoringRule,
    pub seed: u64,
}

impl OffloadConfig {
    /// 31 users, 10 Mcycle tasks, 10 GHz SBS, 0.5 GHz devices, S=2,
    /// T=10^4, 32 runs for each m in 1..=10.
    pub fn standard(seed: u64) -> Self {
        OffloadConfig {
            users: 31,
            task_cycles: 10e6,
            sbs_capacity: 10e9,
            device_capacity: 0.5e9,
            memories: (1..=10).collect(),
            strategies_per_agent: 2,
            rounds: 10_000,
            runs: 32,
            burn_in: DEFAULT_BURN_IN,
            strategy_space: StrategySpace::Full,
            scoring: ScoringRule::PlusOne,
            seed,
        }
    }

    pub fn cutoff(&self) -> Result<f64> {
        cutoff_from_capacities(self.sbs_capacity, self.device_capacity)
    }

    pub fn threshold_latency(&self) -> Result<f64> {
        local_latency(self.task_cycles, self.device_capacity)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("task_cycles", self.task_cycles),
            ("sbs_capacity", self.sbs_capacity),
            ("device_capacity", self.device_capacity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MgError::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.memories.is_empty() {
            return Err(MgError::invalid("memories", "need at least one brain size"));
        }
        let mut sorted = self.memories.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.memories.len() {
            return Err(MgError::invalid("memories", "brain sizes must be distinct"));
        }
        if self.runs == 0 {
            return Err(MgError::invalid("runs", "at least one run per brain size"));
        }
        if self.burn_in >= self.rounds {
            return Err(MgError::invalid("burn_in", "burn-in must leave at least one round"));
        }
        for &m in &self.memories {
            self.game_config(m, 0)?.validate()?;
        }
        Ok(())
    }

    /// Basic-game parameters for brain size `memory`.
    pub fn game_config(&self, memory: u32, seed: u64) -> Result<GameConfig> {
        Ok(GameConfig {
            agents: self.users,
            memory,
            strategies_per_agent: self.strategies_per_agent,
            rounds: self.rounds,
            strategy_space: self.strategy_space,
            scoring: self.scoring,
            cutoff: Some(self.cutoff()?),
            seed,
        })
    }

    pub fn mg_seed(&self, memory: u32, run: usize) -> u64 {
        derive_seed(
            self.seed,
            [
                "offload".to_string(),
                "mg".into(),
                format!("m={memory}"),
                format!("run={run}"),
            ],
        )
    }

    pub fn random_seed(&self, run: usize) -> u64 {
        derive_seed(
            self.seed,
            ["offload".to_string(), "random".into(), format!("run={run}")],
        )
    }

    /// Largest integer offloading count strictly below the cut-off.
    pub fn optimal_offloaders(&self) -> Result<u32> {
        let phi = self.cutoff()?;
        Ok(((phi.ceil() - 1.0).max(0.0) as usize).min(self.users) as u32)
    }
}

/// Per-round view of a basic-game round in offloading terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadRound {
    pub offloading: u32,
    pub control_bit: u8,
    pub latency: f64,
    pub utility_offload: u8,
    pub utility_local: u8,
    pub winners: u32,
    /// Users whose latency is strictly below the local threshold.
    pub below_threshold: u32,
}

pub fn offload_round(offloading: u32, config: &OffloadConfig) -> Result<OffloadRound> {
    let phi = config.cutoff()?;
    let latency = offload_latency(offloading, config.task_cycles, config.sbs_capacity);
    let threshold = config.threshold_latency()?;
    let (uo, ul) = utilities(offloading, phi);
    let users = config.users as u32;
    Ok(OffloadRound {
        offloading,
        control_bit: uo,
        latency,
        utility_offload: uo,
        utility_local: ul,
        winners: if uo == 1 { offloading } else { users - offloading },
        // Local users sit exactly at the threshold and never count.
        below_threshold: if latency < threshold { offloading } else { 0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    AllOffload,
    AllLocal,
    Optimal,
    Random,
}

/// Per-round count of users beating the latency threshold under a fixed policy.
pub fn baseline_series(config: &OffloadConfig, kind: BaselineKind) -> Result<Vec<u32>> {
    let users = config.users as u32;
    let count = |n: u32| offload_round(n, config).map(|r| r.below_threshold);
    match kind {
        BaselineKind::AllOffload => Ok(vec![count(users)?; config.rounds]),
        BaselineKind::AllLocal => Ok(vec![count(0)?; config.rounds]),
        BaselineKind::Optimal => Ok(vec![count(config.optimal_offloaders()?)?; config.rounds]),
        BaselineKind::Random => {
            let mut rng = seeded_rng(config.random_seed(0));
            (0..config.rounds)
                .map(|_| count((0..users).filter(|_| rng.random_bool(0.5)).count() as u32))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    pub sigma_over_n_mean: f64,
    pub sigma_over_n_stderr: f64,
    /// `sqrt(N/4) / N`
    pub sigma_over_n_analytic: f64,
    pub utility_mean: f64,
    pub utility_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendanceSeries {
    pub memory: u32,
    pub attendance: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BelowThreshold {
    pub mg: Vec<u32>,
    pub all_offload: Vec<u32>,
    pub all_local: Vec<u32>,
    pub optimal: Vec<u32>,
    pub random: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySeries {
    /// Population mean utility per round.
    pub mg: Vec<f64>,
    pub random: Vec<f64>,
    pub optimal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadReport {
    pub config: OffloadConfig,
    pub cutoff: f64,
    pub threshold_latency_ms: f64,
    pub all_offload_latency_ms: f64,
    pub optimal_offloaders: u32,
    /// Brain size with the smallest mean volatility.
    pub focus_memory: u32,
    pub rows: Vec<PhaseScanRow>,
    pub random: RandomBaseline,
    /// Run 0 of every brain size.
    pub attendance: Vec<AttendanceSeries>,
    /// Run 0 at the focus brain size versus baselines.
    pub utility: UtilitySeries,
    pub below_threshold: BelowThreshold,
    /// Series that go beyond the reproduced figures.
    pub extensions: Vec<String>,
}

fn population_utility(trace: &GameTrace) -> Vec<f64> {
    let n = trace.agents as f64;
    trace.rounds.iter().map(|r| f64::from(r.winners()) / n).collect()
}

/// Runs the whole experiment: volatility and utility per brain size, the
/// random-choice baseline, and the per-round series behind each figure.
pub fn run_offloading_experiment(config: &OffloadConfig) -> Result<OffloadReport> {
    config.validate()?;
    let phi = config.cutoff()?;
    let base = config.game_config(config.memories[0], 0)?;
    let summaries = run_grid(&base, &config.memories, config.runs, config.burn_in, |m, run| {
        config.mg_seed(m, run)
    })?;
    let rows = phase_rows(config.users, &summaries);
    let focus_memory = rows[minimum_row(&rows).expect("at least one row")].memory;

    let random_summaries = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let seed = config.random_seed(run);
            let trace = random_choice_game(config.users, config.rounds, phi, 1, &mut seeded_rng(seed))?;
            summarize(&trace, 1, run, seed, config.burn_in)
        })
        .collect::<Result<Vec<_>>>()?;
    let (s_mean, s_se) = mean_and_stderr(
        &random_summaries
            .iter()
            .map(|s| s.volatility.sigma_over_n)
            .collect::<Vec<_>>(),
    );
    let (u_mean, u_se) = mean_and_stderr(&random_summaries.iter().map(|s| s.mean_utility).collect::<Vec<_>>());
    let n = config.users as f64;
    let random = RandomBaseline {
        sigma_over_n_mean: s_mean,
        sigma_over_n_stderr: s_se,
        sigma_over_n_analytic: (n / 4.0).sqrt() / n,
        utility_mean: u_mean,
        utility_stderr: u_se,
    };

    let run_zero = config
        .memories
        .par_iter()
        .map(|&m| {
            let seed = config.mg_seed(m, 0);
            run_game(&config.game_config(m, seed)?, &mut seeded_rng(seed))
        })
        .collect::<Result<Vec<_>>>()?;
    let attendance = run_zero
        .iter()
        .map(|t| AttendanceSeries {
            memory: t.memory,
            attendance: t.attendance(),
        })
        .collect();
    let focus_trace = run_zero
        .iter()
        .find(|t| t.memory == focus_memory)
        .expect("focus memory is in the grid");
    let random_trace = random_choice_game(
        config.users,
        config.rounds,
        phi,
        1,
        &mut seeded_rng(config.random_seed(0)),
    )?;

    let below = |trace: &GameTrace| -> Result<Vec<u32>> {
        trace
            .rounds
            .iter()
            .map(|r| offload_round(r.attendance, config).map(|o| o.below_threshold))
            .collect()
    };
    let optimal_offloaders = config.optimal_offloaders()?;
    let below_threshold = BelowThreshold {
        mg: below(focus_trace)?,
        all_offload: baseline_series(config, BaselineKind::AllOffload)?,
        all_local: baseline_series(config, BaselineKind::AllLocal)?,
        optimal: baseline_series(config, BaselineKind::Optimal)?,
        random: below(&random_trace)?,
    };
    let utility = UtilitySeries {
        mg: population_utility(focus_trace),
        random: population_utility(&random_trace),
        optimal: f64::from(offload_round(optimal_offloaders, config)?.winners) / n,
    };

    Ok(OffloadReport {
        config: config.clone(),
        cutoff: phi,
        threshold_latency_ms: config.threshold_latency()? * 1e3,
        all_offload_latency_ms: offload_latency(config.users as u32, config.task_cycles, config.sbs_capacity) * 1e3,
        optimal_offloaders,
        focus_memory,
        rows,
        random,
        attendance,
        utility,
        below_threshold,
        extensions: vec!["fig5-random-baseline".to_string()],
    })
}

/// Most frequent value after `burn_in`; the smallest wins ties.
pub fn series_mode(series: &[u32], burn_in: usize) -> Option<u32> {
    let mut counts = std::collections::BTreeMap::new();
    for &v in series.iter().skip(burn_in) {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(v, _)| v)
}
