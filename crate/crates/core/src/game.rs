//! The round-by-round engine of the basic two-action minority game.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{update_scores, Agent, ScoringRule};
use crate::error::{MgError, Result};
use crate::history::{check_memory, History};
use crate::strategy::{draw_strategies, StrategySpace};

/// Parameters of one basic game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub agents: usize,
    pub memory: u32,
    pub strategies_per_agent: usize,
    pub rounds: usize,
    #[serde(default)]
    pub strategy_space: StrategySpace,
    #[serde(default)]
    pub scoring: ScoringRule,
    /// Attendance threshold; `None` means the symmetric cut-off `N/2`.
    #[serde(default)]
    pub cutoff: Option<f64>,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(agents: usize, memory: u32, strategies_per_agent: usize, rounds: usize, seed: u64) -> Self {
        GameConfig {
            agents,
            memory,
            strategies_per_agent,
            rounds,
            strategy_space: StrategySpace::default(),
            scoring: ScoringRule::default(),
            cutoff: None,
            seed,
        }
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn with_scoring(mut self, scoring: ScoringRule) -> Self {
        self.scoring = scoring;
        self
    }

    pub fn with_strategy_space(mut self, space: StrategySpace) -> Self {
        self.strategy_space = space;
        self
    }

    pub fn effective_cutoff(&self) -> f64 {
        self.cutoff.unwrap_or(self.agents as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_memory(self.memory)?;
        validate_population(self.agents, self.cutoff)?;
        if self.strategies_per_agent == 0 {
            return Err(MgError::invalid("strategies_per_agent", "S must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(MgError::invalid("rounds", "T must be at least 1"));
        }
        if self.strategy_space == StrategySpace::Reduced && self.strategies_per_agent > 1usize << (self.memory + 1) {
            return Err(MgError::invalid(
                "strategies_per_agent",
                format!(
                    "reduced space for m={} holds only {} strategies",
                    self.memory,
                    1usize << (self.memory + 1)
                ),
            ));
        }
        Ok(())
    }

    /// Runs the game on a fresh rng seeded from `self.seed`.
    pub fn run(&self) -> Result<GameTrace> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        run_game(self, &mut rng)
    }
}

/// Checks the `N` / cut-off pair shared by every two-action game.
pub fn validate_population(agents: usize, cutoff: Option<f64>) -> Result<()> {
    match cutoff {
        None => {
            if agents < 3 || agents.is_multiple_of(2) {
                return Err(MgError::invalid(
                    "agents",
                    format!("N must be odd and at least 3 with the symmetric cut-off, got {agents}"),
                ));
            }
        }
        Some(phi) => {
            if agents == 0 {
                return Err(MgError::invalid("agents", "N must be at least 1"));
            }
            if !(phi > 0.0 && phi < agents as f64) {
                return Err(MgError::invalid(
                    "cutoff",
                    format!("cut-off must lie in (0, {agents}), got {phi}"),
                ));
            }
            if agents.is_multiple_of(2) && phi == agents as f64 / 2.0 {
                return Err(MgError::invalid("agents", "N must be odd when the cut-off is N/2"));
            }
        }
    }
    Ok(())
}

/// Result of one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    /// History index the agents conditioned on.
    pub history: u32,
    /// Number of agents that chose action 1.
    pub attendance: u32,
    pub winning_action: u8,
    pub actions: Vec<u8>,
    pub payoffs: Vec<u8>,
}

impl RoundOutcome {
    pub fn winners(&self) -> u32 {
        self.payoffs.iter().map(|&p| u32::from(p)).sum()
    }
}

/// Generalized minority rule: action 1 wins iff fewer than `cutoff` agents took it.
#[inline]
pub fn winning_action(attendance: u32, cutoff: f64) -> u8 {
    u8::from(f64::from(attendance) < cutoff)
}

/// Scores a completed action profile.
pub fn resolve_round(actions: Vec<u8>, history: u32, cutoff: f64) -> RoundOutcome {
    let attendance = actions.iter().map(|&a| u32::from(a)).sum();
    let winner = winning_action(attendance, cutoff);
    let payoffs = actions.iter().map(|&a| u8::from(a == winner)).collect();
    RoundOutcome {
        history,
        attendance,
        winning_action: winner,
        actions,
        payoffs,
    }
}

/// Every agent picks its best strategy's action; the minority side is paid.
pub fn play_round<R: Rng + ?Sized>(
    agents: &[Agent],
    history: &History,
    cutoff: f64,
    rng: &mut R,
) -> Result<RoundOutcome> {
    if agents.is_empty() {
        return Err(MgError::invalid("agents", "a round needs at least one agent"));
    }
    let actions = agents
        .iter()
        .map(|a| a.select_action(history, rng).map(|(action, _)| action))
        .collect::<Result<Vec<u8>>>()?;
    Ok(resolve_round(actions, history.index(), cutoff))
}

/// Full record of a game, sufficient for every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub agents: usize,
    pub memory: u32,
    pub cutoff: f64,
    /// Present when the trace came from a strategy-driven game.
    pub config: Option<GameConfig>,
    pub initial_history: History,
    pub rounds: Vec<RoundOutcome>,
}

impl GameTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn attendance(&self) -> Vec<u32> {
        self.rounds.iter().map(|r| r.attendance).collect()
    }
}

/// Draws the initial history, then each agent's strategies, in that order.
pub fn initialize<R: Rng + ?Sized>(config: &GameConfig, rng: &mut R) -> Result<(History, Vec<Agent>)> {
    config.validate()?;
    let history = History::random(config.memory, rng)?;
    let agents = (0..config.agents)
        .map(|_| {
            draw_strategies(rng, config.memory, config.strategies_per_agent, config.strategy_space).and_then(Agent::new)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((history, agents))
}

/// Plays `config.rounds` rounds: select, resolve, score, shift history.
pub fn run_game<R: Rng + ?Sized>(config: &GameConfig, rng: &mut R) -> Result<GameTrace> {
    let (initial_history, mut agents) = initialize(config, rng)?;
    let cutoff = config.effective_cutoff();
    let mut history = initial_history;
    let mut rounds = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        let outcome = play_round(&agents, &history, cutoff, rng)?;
        update_scores(&mut agents, &history, outcome.winning_action, config.scoring)?;
        history = history.advance(outcome.winning_action);
        rounds.push(outcome);
    }
    Ok(GameTrace {
        agents: config.agents,
        memory: config.memory,
        cutoff,
        config: Some(config.clone()),
        initial_history,
        rounds,
    })
}
