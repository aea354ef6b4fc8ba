//! Evolutionary minority game: every agent follows one shared strategy with
//! probability equal to its gene value, and redraws the gene after losing
//! too much.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::game::{resolve_round, validate_population, GameTrace, RoundOutcome};
use crate::history::{check_memory, History};
use crate::strategy::Strategy;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommonStrategy {
    /// Predict that the last winning action wins again.
    #[default]
    FollowLastWinner,
    Table(Strategy),
}

impl CommonStrategy {
    pub fn resolve(&self, memory: u32) -> Result<Strategy> {
        match self {
            CommonStrategy::FollowLastWinner => Strategy::follow_last_winner(memory),
            CommonStrategy::Table(s) if s.memory() == memory => Ok(s.clone()),
            CommonStrategy::Table(s) => Err(MgError::invalid(
                "common_strategy",
                format!("table is for m={} but the game uses m={memory}", s.memory()),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationRule {
    /// New gene uniform on [0, 1].
    #[default]
    Uniform,
    /// New gene uniform within `width` of the old one, clamped to [0, 1].
    Local { width: f64 },
}

impl MutationRule {
    fn redraw<R: Rng + ?Sized>(self, gene: f64, rng: &mut R) -> f64 {
        match self {
            MutationRule::Uniform => rng.random::<f64>(),
            MutationRule::Local { width } => (gene + width * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneInit {
    #[default]
    Uniform,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmgAgent {
    pub gene: f64,
    pub score: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgConfig {
    pub agents: usize,
    pub memory: u32,
    pub rounds: usize,
    /// Mutation happens when the cumulative score drops below `-threshold`.
    /// An infinite threshold disables mutation.
    pub threshold: f64,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub common_strategy: CommonStrategy,
    #[serde(default)]
    pub mutation: MutationRule,
    #[serde(default)]
    pub initial_genes: GeneInit,
    /// Rounds between gene snapshots; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_interval: usize,
    pub seed: u64,
}

impl EmgConfig {
    pub fn validate(&self) -> Result<()> {
        check_memory(self.memory)?;
        validate_population(self.agents, self.cutoff)?;
        if self.rounds == 0 {
            return Err(MgError::invalid("rounds", "T must be at least 1"));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(MgError::invalid("threshold", "d must be non-negative"));
        }
        if let GeneInit::Fixed(p) = self.initial_genes {
            if !(0.0..=1.0).contains(&p) {
                return Err(MgError::invalid("initial_genes", format!("gene {p} outside [0, 1]")));
            }
        }
        if let MutationRule::Local { width } = self.mutation {
            if !(width > 0.0 && width.is_finite()) {
                return Err(MgError::invalid("mutation", "local width must be positive"));
            }
        }
        self.common_strategy.resolve(self.memory).map(|_| ())
    }

    pub fn effective_cutoff(&self) -> f64 {
        self.cutoff.unwrap_or(self.agents as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgRound {
    pub outcome: RoundOutcome,
    /// Agents whose gene was redrawn this round.
    pub mutated: Vec<usize>,
}

/// One round: act on the shared prediction, score +1 / -1, then mutate.
pub fn emg_step<R: Rng + ?Sized>(
    agents: &mut [EmgAgent],
    history: &History,
    common: &Strategy,
    cutoff: f64,
    threshold: f64,
    mutation: MutationRule,
    rng: &mut R,
) -> Result<EmgRound> {
    let prediction = common.predict(history)?;
    let actions = agents
        .iter()
        .map(|a| {
            if rng.random_bool(a.gene) {
                prediction
            } else {
                1 - prediction
            }
        })
        .collect();
    let outcome = resolve_round(actions, history.index(), cutoff);
    let mut mutated = Vec::new();
    for (i, (agent, &won)) in agents.iter_mut().zip(&outcome.payoffs).enumerate() {
        agent.score += if won == 1 { 1 } else { -1 };
        if (agent.score as f64) < -threshold {
            agent.gene = mutation.redraw(agent.gene, rng);
            agent.score = 0;
            mutated.push(i);
        }
    }
    Ok(EmgRound { outcome, mutated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgTrace {
    pub trace: GameTrace,
    pub mutations_per_round: Vec<u32>,
    /// `(round, genes)` pairs taken after the round completed.
    pub gene_snapshots: Vec<(usize, Vec<f64>)>,
    pub final_agents: Vec<EmgAgent>,
}

pub fn run_emg(config: &EmgConfig) -> Result<EmgTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let common = config.common_strategy.resolve(config.memory)?;
    let cutoff = config.effective_cutoff();
    let initial_history = History::random(config.memory, &mut rng)?;
    let mut agents: Vec<EmgAgent> = (0..config.agents)
        .map(|_| EmgAgent {
            gene: match config.initial_genes {
                GeneInit::Uniform => rng.random::<f64>(),
                GeneInit::Fixed(p) => p,
            },
            score: 0,
        })
        .collect();
    let mut history = initial_history;
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut mutations_per_round = Vec::with_capacity(config.rounds);
    let mut gene_snapshots = Vec::new();
    for t in 0..config.rounds {
        let step = emg_step(
            &mut agents,
            &history,
            &common,
            cutoff,
            config.threshold,
            config.mutation,
            &mut rng,
        )?;
        history = history.advance(step.outcome.winning_action);
        mutations_per_round.push(step.mutated.len() as u32);
        rounds.push(step.outcome);
        if config.snapshot_interval > 0 && (t + 1) % config.snapshot_interval == 0 {
            gene_snapshots.push((t + 1, agents.iter().map(|a| a.gene).collect()));
        }
    }
    Ok(EmgTrace {
        trace: GameTrace {
            agents: config.agents,
            memory: config.memory,
            cutoff,
            config: None,
            initial_history,
            rounds,
        },
        mutations_per_round,
        gene_snapshots,
        final_agents: agents,
    })
}
