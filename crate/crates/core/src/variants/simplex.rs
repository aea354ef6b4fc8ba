//! Multiple-choice (simplex) minority game with exponential learning over
//! strategy-selection probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};

/// Largest supported history space `K^m`.
pub const MAX_HISTORY_SPACE: u64 = 1 << 20;

/// Last `m` winning choices, stored as a base-`K` integer (newest digit last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplexHistory {
    choices: u32,
    memory: u32,
    index: u32,
}

fn history_space(choices: u32, memory: u32) -> Result<u32> {
    if choices < 2 {
        return Err(MgError::invalid(
            "choices",
            format!("K must be at least 2, got {choices}"),
        ));
    }
    if memory == 0 {
        return Err(MgError::invalid("memory", "brain size must be at least 1"));
    }
    let size = (0..memory).try_fold(1u64, |acc, _| {
        let next = acc * u64::from(choices);
        (next <= MAX_HISTORY_SPACE).then_some(next)
    });
    size.map(|s| s as u32)
        .ok_or_else(|| MgError::invalid("memory", format!("K^m exceeds {MAX_HISTORY_SPACE} histories")))
}

impl SimplexHistory {
    pub fn new(choices: u32, memory: u32, index: u32) -> Result<Self> {
        let size = history_space(choices, memory)?;
        if index >= size {
            return Err(MgError::invalid("history", format!("index {index} >= {size}")));
        }
        Ok(SimplexHistory { choices, memory, index })
    }

    pub fn random<R: Rng + ?Sized>(choices: u32, memory: u32, rng: &mut R) -> Result<Self> {
        let size = history_space(choices, memory)?;
        Ok(SimplexHistory {
            choices,
            memory,
            index: rng.random_range(0..size),
        })
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn size(&self) -> u32 {
        self.choices.pow(self.memory)
    }

    pub fn advance(self, winner: u32) -> Self {
        debug_assert!(winner < self.choices);
        let size = u64::from(self.size());
        SimplexHistory {
            index: ((u64::from(self.index) * u64::from(self.choices) + u64::from(winner)) % size) as u32,
            ..self
        }
    }
}

/// Softmax of `learning_rate * score`, shifted by the max score for stability.
pub fn exponential_learning_update(scores: &[f64], learning_rate: f64) -> Result<Vec<f64>> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(MgError::invalid("learning_rate", "Gamma must be positive and finite"));
    }
    if scores.is_empty() || scores.iter().any(|s| !s.is_finite()) {
        return Err(MgError::invalid("scores", "need at least one finite score"));
    }
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (learning_rate * (s - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexAgent {
    /// One table per strategy, `K^m` entries each.
    strategies: Vec<Vec<u32>>,
    scores: Vec<f64>,
    probabilities: Vec<f64>,
    learning_rate: f64,
}

impl SimplexAgent {
    pub fn new(strategies: Vec<Vec<u32>>, learning_rate: f64) -> Result<Self> {
        if strategies.is_empty() {
            return Err(MgError::invalid("strategies_per_agent", "need at least one strategy"));
        }
        let s = strategies.len();
        let scores = vec![0.0; s];
        let probabilities = exponential_learning_update(&scores, learning_rate)?;
        Ok(SimplexAgent {
            strategies,
            scores,
            probabilities,
            learning_rate,
        })
    }

    pub fn with_probabilities(mut self, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != self.strategies.len()
            || probabilities.iter().any(|p| p.is_nan() || *p < 0.0)
            || (probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(MgError::invalid(
                "probabilities",
                "not a probability vector over strategies",
            ));
        }
        self.probabilities = probabilities;
        Ok(self)
    }

    pub fn random<R: Rng + ?Sized>(
        choices: u32,
        memory: u32,
        strategies: usize,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let size = history_space(choices, memory)?;
        let tables = (0..strategies)
            .map(|_| (0..size).map(|_| rng.random_range(0..choices)).collect())
            .collect();
        Self::new(tables, learning_rate)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn strategies(&self) -> &[Vec<u32>] {
        &self.strategies
    }

    /// Samples a strategy from the current probabilities and returns its
    /// choice on `history`, with the strategy index.
    pub fn sample_choice<R: Rng + ?Sized>(&self, history: &SimplexHistory, rng: &mut R) -> (u32, usize) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.probabilities.len() - 1;
        for (s, &p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = s;
                break;
            }
        }
        // Rounding can leave u >= acc; fall back to the last strategy with mass.
        if u >= acc {
            pick = self.probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(pick);
        }
        (self.strategies[pick][history.index() as usize], pick)
    }

    pub fn relearn(&mut self) -> Result<()> {
        self.probabilities = exponential_learning_update(&self.scores, self.learning_rate)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexRound {
    pub history: u32,
    pub counts: Vec<u32>,
    /// Sum of all agents' choices.
    pub aggregate_bid: u64,
    /// Every choice with the minimum count.
    pub winning_choices: Vec<u32>,
    pub choices: Vec<u32>,
    pub strategies_used: Vec<usize>,
    pub payoffs: Vec<u8>,
}

impl SimplexRound {
    /// The choice the history advances by: the lowest-index winner.
    pub fn recorded_winner(&self) -> u32 {
        self.winning_choices[0]
    }
}

/// Tallies a choice profile; the least-chosen choices win.
pub fn resolve_simplex(choices: Vec<u32>, strategies_used: Vec<usize>, k: u32, history: u32) -> SimplexRound {
    let mut counts = vec![0u32; k as usize];
    for &c in &choices {
        counts[c as usize] += 1;
    }
    let min = *counts.iter().min().expect("K >= 2");
    let winning_choices: Vec<u32> = (0..k).filter(|&c| counts[c as usize] == min).collect();
    let payoffs = choices.iter().map(|c| u8::from(winning_choices.contains(c))).collect();
    SimplexRound {
        history,
        aggregate_bid: choices.iter().map(|&c| u64::from(c)).sum(),
        counts,
        winning_choices,
        choices,
        strategies_used,
        payoffs,
    }
}

/// Samples, resolves, and credits +1 to each winner's played strategy.
/// Probabilities are not touched; see [`exponential_learning_update`].
pub fn simplex_step<R: Rng + ?Sized>(
    agents: &mut [SimplexAgent],
    history: &SimplexHistory,
    rng: &mut R,
) -> Result<SimplexRound> {
    if agents.is_empty() {
        return Err(MgError::invalid("agents", "a round needs at least one agent"));
    }
    let (choices, used): (Vec<u32>, Vec<usize>) = agents.iter().map(|a| a.sample_choice(history, rng)).unzip();
    let round = resolve_simplex(choices, used, history.choices, history.index());
    for ((agent, &s), &won) in agents.iter_mut().zip(&round.strategies_used).zip(&round.payoffs) {
        if won == 1 {
            agent.scores[s] += 1.0;
        }
    }
    Ok(round)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub agents: usize,
    pub choices: u32,
    pub memory: u32,
    pub strategies_per_agent: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        history_space(self.choices, self.memory)?;
        if self.agents == 0 {
            return Err(MgError::invalid("agents", "N must be at least 1"));
        }
        if self.strategies_per_agent == 0 {
            return Err(MgError::invalid("strategies_per_agent", "S must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(MgError::invalid("rounds", "T must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MgError::invalid("learning_rate", "Gamma must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexTrace {
    pub initial_history: u32,
    pub rounds: Vec<SimplexRound>,
    pub final_agents: Vec<SimplexAgent>,
}

pub fn run_simplex(config: &SimplexConfig) -> Result<SimplexTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = SimplexHistory::random(config.choices, config.memory, &mut rng)?;
    let initial_history = history.index();
    let mut agents = (0..config.agents)
        .map(|_| {
            SimplexAgent::random(
                config.choices,
                config.memory,
                config.strategies_per_agent,
                config.learning_rate,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rounds = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        let round = simplex_step(&mut agents, &history, &mut rng)?;
        agents.iter_mut().try_for_each(SimplexAgent::relearn)?;
        history = history.advance(round.recorded_winner());
        rounds.push(round);
    }
    Ok(SimplexTrace {
        initial_history,
        rounds,
        final_agents: agents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_scores_give_uniform() {
        let p = exponential_learning_update(&[2.0, 2.0, 2.0, 2.0], 0.7).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn two_strategy_softmax_value() {
        let p = exponential_learning_update(&[1.0, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[0] - 0.7311).abs() < 1e-4);
        assert!((p[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn sharp_learning_concentrates() {
        let p = exponential_learning_update(&[3.0, 1.0, 2.0], 20.0).unwrap();
        assert!(p[0] >= 1.0 - 1e-6);
    }

    #[test]
    fn huge_scores_do_not_overflow() {
        let p = exponential_learning_update(&[1e6, 1e6 - 1.0], 1.0).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn learning_rate_must_be_positive() {
        assert!(exponential_learning_update(&[0.0], 0.0).is_err());
        assert!(exponential_learning_update(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn unique_minimum_wins() {
        // counts (1, 2, 2)
        let r = resolve_simplex(vec![0, 1, 1, 2, 2], vec![0; 5], 3, 0);
        assert_eq!(r.counts, vec![1, 2, 2]);
        assert_eq!(r.winning_choices, vec![0]);
        assert_eq!(r.payoffs, vec![1, 0, 0, 0, 0]);
        assert_eq!(r.aggregate_bid, 6);
    }

    #[test]
    fn ties_advance_by_lowest_index() {
        let r = resolve_simplex(vec![0, 0, 1, 2], vec![0; 4], 3, 0);
        assert_eq!(r.winning_choices, vec![1, 2]);
        assert_eq!(r.recorded_winner(), 1);
    }

    #[test]
    fn k_below_two_rejected() {
        assert!(SimplexHistory::new(1, 2, 0).is_err());
        let cfg = SimplexConfig {
            agents: 5,
            choices: 1,
            memory: 2,
            strategies_per_agent: 2,
            rounds: 10,
            learning_rate: 1.0,
            seed: 0,
        };
        assert!(run_simplex(&cfg).is_err());
    }

    #[test]
    fn base_k_history_shift() {
        let h = SimplexHistory::new(3, 2, 7).unwrap(); // "21"
        assert_eq!(h.advance(0).index(), 3); // "10"
    }

    #[test]
    fn run_is_reproducible() {
        let cfg = SimplexConfig {
            agents: 9,
            choices: 3,
            memory: 2,
            strategies_per_agent: 2,
            rounds: 300,
            learning_rate: 0.5,
            seed: 12,
        };
        assert_eq!(run_simplex(&cfg).unwrap(), run_simplex(&cfg).unwrap());
    }

    proptest! {
        #[test]
        fn softmax_stays_on_simplex(scores in proptest::collection::vec(-1e3f64..1e3, 1..12), gamma in 1e-3f64..50.0) {
            let p = exponential_learning_update(&scores, gamma).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            for i in 0..scores.len() {
                for j in 0..scores.len() {
                    if scores[i] > scores[j] {
                        prop_assert!(p[i] >= p[j]);
                    }
                }
            }
        }

        #[test]
        fn counts_sum_to_population(choices in proptest::collection::vec(0u32..4, 1..40)) {
            let n = choices.len();
            let total: u64 = choices.iter().map(|&c| u64::from(c)).sum();
            let r = resolve_simplex(choices, vec![0; n], 4, 0);
            prop_assert_eq!(r.counts.iter().sum::<u32>() as usize, n);
            prop_assert_eq!(r.aggregate_bid, total);
        }
    }
}
