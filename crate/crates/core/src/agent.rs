use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::history::History;
use crate::strategy::Strategy;

/// How virtual strategy scores react to a round's winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringRule {
    /// +1 for a correct prediction, unchanged otherwise.
    #[default]
    PlusOne,
    /// +1 for a correct prediction, -1 otherwise.
    PlusMinusOne,
}

impl ScoringRule {
    #[inline]
    pub fn delta(self, correct: bool) -> i64 {
        match (self, correct) {
            (_, true) => 1,
            (ScoringRule::PlusOne, false) => 0,
            (ScoringRule::PlusMinusOne, false) => -1,
        }
    }
}

/// An agent holding a fixed set of strategies and their running scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    strategies: Vec<Strategy>,
    scores: Vec<i64>,
}

impl Agent {
    pub fn new(strategies: Vec<Strategy>) -> Result<Self> {
        let scores = vec![0; strategies.len()];
        Self::with_scores(strategies, scores)
    }

    pub fn with_scores(strategies: Vec<Strategy>, scores: Vec<i64>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(MgError::invalid(
                "strategies_per_agent",
                "an agent needs at least one strategy",
            ));
        }
        if strategies.len() != scores.len() {
            return Err(MgError::invalid(
                "scores",
                format!("{} scores for {} strategies", scores.len(), strategies.len()),
            ));
        }
        let memory = strategies[0].memory();
        if strategies.iter().any(|s| s.memory() != memory) {
            return Err(MgError::invalid("strategies", "mixed brain sizes"));
        }
        Ok(Agent { strategies, scores })
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn scores(&self) -> &[i64] {
        &self.scores
    }

    pub fn memory(&self) -> u32 {
        self.strategies[0].memory()
    }

    pub fn best_score(&self) -> i64 {
        *self.scores.iter().max().expect("agent has strategies")
    }

    /// Index of a highest-scoring strategy, ties broken uniformly via `rng`.
    ///
    /// The rng is only consumed when there is an actual tie.
    pub fn best_strategy<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let best = self.best_score();
        let mut ties = self.scores.iter().enumerate().filter(|(_, &v)| v == best);
        let first = ties.next().map(|(i, _)| i).expect("nonempty");
        let n_ties = 1 + ties.count();
        if n_ties == 1 {
            return first;
        }
        let pick = rng.random_range(0..n_ties);
        self.scores
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == best)
            .nth(pick)
            .map(|(i, _)| i)
            .expect("pick < n_ties")
    }

    /// Action of the best strategy on `history`, with the chosen index.
    pub fn select_action<R: Rng + ?Sized>(&self, history: &History, rng: &mut R) -> Result<(u8, usize)> {
        let s = self.best_strategy(rng);
        Ok((self.strategies[s].predict(history)?, s))
    }

    /// Scores every strategy, played or not, against `winner`.
    pub fn update_scores(&mut self, history: &History, winner: u8, rule: ScoringRule) -> Result<()> {
        for (strategy, score) in self.strategies.iter().zip(self.scores.iter_mut()) {
            *score += rule.delta(strategy.predict(history)? == winner);
        }
        Ok(())
    }
}

/// Applies [`Agent::update_scores`] to a whole population.
pub fn update_scores(agents: &mut [Agent], history: &History, winner: u8, rule: ScoringRule) -> Result<()> {
    agents
        .iter_mut()
        .try_for_each(|a| a.update_scores(history, winner, rule))
}
