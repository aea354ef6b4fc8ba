//! Grand canonical minority game: an agent sits a round out whenever its best
//! virtual score is below the activity threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{update_scores, Agent};
use crate::error::{MgError, Result};
use crate::game::{initialize, winning_action, GameConfig, GameTrace, RoundOutcome};
use crate::history::History;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmgConfig {
    pub game: GameConfig,
    /// Activity threshold `epsilon`; `-inf` keeps everyone active.
    pub threshold: f64,
}

impl GcmgConfig {
    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        if self.threshold.is_nan() || self.threshold == f64::INFINITY {
            return Err(MgError::invalid("threshold", "epsilon must be a number below +inf"));
        }
        Ok(())
    }
}

/// A round outcome plus who took part. Inactive agents are recorded with
/// action 0 and payoff 0 and do not count toward attendance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmgRound {
    pub outcome: RoundOutcome,
    pub active: Vec<bool>,
}

impl GcmgRound {
    pub fn active_count(&self) -> u32 {
        self.active.iter().filter(|&&a| a).count() as u32
    }
}

pub fn gcmg_step<R: Rng + ?Sized>(
    agents: &[Agent],
    history: &History,
    cutoff: f64,
    threshold: f64,
    rng: &mut R,
) -> Result<GcmgRound> {
    let mut active = Vec::with_capacity(agents.len());
    let mut actions = Vec::with_capacity(agents.len());
    for agent in agents {
        let is_active = agent.best_score() as f64 >= threshold;
        active.push(is_active);
        actions.push(if is_active {
            agent.select_action(history, rng)?.0
        } else {
            0
        });
    }
    let attendance: u32 = actions.iter().map(|&a| u32::from(a)).sum();
    let winner = winning_action(attendance, cutoff);
    let payoffs = actions
        .iter()
        .zip(&active)
        .map(|(&a, &on)| u8::from(on && a == winner))
        .collect();
    Ok(GcmgRound {
        outcome: RoundOutcome {
            history: history.index(),
            attendance,
            winning_action: winner,
            actions,
            payoffs,
        },
        active,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmgTrace {
    pub trace: GameTrace,
    pub active_counts: Vec<u32>,
}

/// Same initialization and rng order as [`crate::game::run_game`].
pub fn run_gcmg(config: &GcmgConfig) -> Result<GcmgTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.game.seed);
    let (initial_history, mut agents) = initialize(&config.game, &mut rng)?;
    let cutoff = config.game.effective_cutoff();
    let mut history = initial_history;
    let mut rounds = Vec::with_capacity(config.game.rounds);
    let mut active_counts = Vec::with_capacity(config.game.rounds);
    for _ in 0..config.game.rounds {
        let step = gcmg_step(&agents, &history, cutoff, config.threshold, &mut rng)?;
        update_scores(&mut agents, &history, step.outcome.winning_action, config.game.scoring)?;
        history = history.advance(step.outcome.winning_action);
        active_counts.push(step.active_count());
        rounds.push(step.outcome);
    }
    Ok(GcmgTrace {
        trace: GameTrace {
            agents: config.game.agents,
            memory: config.game.memory,
            cutoff,
            config: Some(config.game.clone()),
            initial_history,
            rounds,
        },
        active_counts,
    })
}
