//! Stage-game equilibria: pure profiles, mixed profiles and the
//! random-choice baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::game::{resolve_round, validate_population, winning_action, GameTrace};
use crate::history::History;

/// Largest population for which mixed payoffs are computed exactly.
pub const EXACT_PAYOFF_LIMIT: usize = 25;
/// Largest population for which the pure-NE count is cross-checked by enumeration.
pub const ENUMERATION_LIMIT: usize = 15;
pub const MONTE_CARLO_SAMPLES: usize = 1_000_000;
const MONTE_CARLO_CHUNKS: usize = 16;

/// One-shot minority game: payoff 1 to the side that wins under the cut-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageGame {
    agents: usize,
    cutoff: f64,
}

impl StageGame {
    /// Symmetric game with cut-off `N/2`; `N` must be odd.
    pub fn new(agents: usize) -> Result<Self> {
        validate_population(agents, None)?;
        Ok(StageGame {
            agents,
            cutoff: agents as f64 / 2.0,
        })
    }

    pub fn with_cutoff(agents: usize, cutoff: f64) -> Result<Self> {
        if agents.is_multiple_of(2) {
            return Err(MgError::invalid("agents", "stage games need an odd N"));
        }
        validate_population(agents, Some(cutoff))?;
        Ok(StageGame { agents, cutoff })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Payoff to a player choosing `action` when `others_attending` of the
    /// remaining players choose action 1.
    #[inline]
    pub fn payoff_against(&self, action: u8, others_attending: usize) -> u8 {
        let attendance = others_attending as u32 + u32::from(action);
        u8::from(winning_action(attendance, self.cutoff) == action)
    }

    pub fn payoffs(&self, profile: &[u8]) -> Result<Vec<u8>> {
        self.check_profile(profile)?;
        Ok(resolve_round(profile.to_vec(), 0, self.cutoff).payoffs)
    }

    fn check_profile(&self, profile: &[u8]) -> Result<()> {
        if profile.len() != self.agents {
            return Err(MgError::invalid(
                "profile",
                format!("expected {} actions, got {}", self.agents, profile.len()),
            ));
        }
        if profile.iter().any(|&a| a > 1) {
            return Err(MgError::invalid("profile", "actions must be 0 or 1"));
        }
        Ok(())
    }
}

/// True iff no single player can strictly raise its payoff by switching.
pub fn is_pure_nash(game: &StageGame, profile: &[u8]) -> Result<bool> {
    game.check_profile(profile)?;
    let attendance: usize = profile.iter().map(|&a| usize::from(a)).sum();
    Ok(profile.iter().all(|&a| {
        let others = attendance - usize::from(a);
        game.payoff_against(a, others) >= game.payoff_against(1 - a, others)
    }))
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureNashCount {
    pub agents: usize,
    pub formula: u128,
    /// Exhaustive count, present when `N` is small enough to enumerate.
    pub enumerated: Option<u128>,
    /// Total payoff at any pure equilibrium, the minority size `(N-1)/2`.
    pub welfare: usize,
}

impl PureNashCount {
    pub fn cross_checked(&self) -> bool {
        self.enumerated.is_some()
    }
}

/// `C(N, (N-1)/2) + C(N, (N+1)/2)` pure equilibria of the symmetric game,
/// confirmed by enumerating all `2^N` profiles when `N <= 15`.
pub fn count_pure_nash(agents: usize) -> Result<PureNashCount> {
    let game = StageGame::new(agents)?;
    let n = agents as u64;
    let formula = binomial(n, (n - 1) / 2) + binomial(n, n.div_ceil(2));
    let enumerated = if agents <= ENUMERATION_LIMIT {
        let count = enumerate_pure_nash(&game)?;
        if count != formula {
            return Err(MgError::Consistency(format!(
                "N={agents}: formula gives {formula} pure equilibria, enumeration finds {count}"
            )));
        }
        Some(count)
    } else {
        None
    };
    Ok(PureNashCount {
        agents,
        formula,
        enumerated,
        welfare: (agents - 1) / 2,
    })
}

/// Counts pure equilibria by checking every profile.
pub fn enumerate_pure_nash(game: &StageGame) -> Result<u128> {
    let n = game.agents();
    if n >= 32 {
        return Err(MgError::invalid("agents", "enumeration is limited to N < 32"));
    }
    (0u64..1 << n)
        .into_par_iter()
        .map(|mask| {
            let profile: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
            is_pure_nash(game, &profile).map(u128::from)
        })
        .sum()
}

/// Per-player probability of choosing action 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile(Vec<f64>);

impl MixedProfile {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MgError::invalid("profile", format!("probability {p} outside [0, 1]")));
        }
        Ok(MixedProfile(probabilities))
    }

    pub fn uniform(agents: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; agents])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffEstimate {
    pub value: f64,
    /// Standard error; `None` for exact results.
    pub stderr: Option<f64>,
}

/// Expected payoffs of both actions for one player, with their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPayoffs {
    pub action0: PayoffEstimate,
    pub action1: PayoffEstimate,
    /// `action1 - action0`; Monte Carlo estimates are paired.
    pub difference: PayoffEstimate,
}

fn check_mixed(game: &StageGame, profile: &MixedProfile, agent: usize) -> Result<()> {
    if profile.len() != game.agents() {
        return Err(MgError::invalid(
            "profile",
            format!("expected {} probabilities, got {}", game.agents(), profile.len()),
        ));
    }
    if agent >= game.agents() {
        return Err(MgError::invalid("agent", format!("agent {agent} out of range")));
    }
    Ok(())
}

/// Distribution of how many of the other players choose action 1.
fn others_distribution(profile: &MixedProfile, agent: usize) -> Vec<f64> {
    let mut dist = vec![1.0];
    for (j, &p) in profile.probabilities().iter().enumerate() {
        if j == agent {
            continue;
        }
        let mut next = vec![0.0; dist.len() + 1];
        for (k, &mass) in dist.iter().enumerate() {
            next[k] += mass * (1.0 - p);
            next[k + 1] += mass * p;
        }
        dist = next;
    }
    dist
}

pub fn action_payoffs<R: Rng + ?Sized>(
    game: &StageGame,
    profile: &MixedProfile,
    agent: usize,
    rng: &mut R,
) -> Result<ActionPayoffs> {
    check_mixed(game, profile, agent)?;
    if game.agents() <= EXACT_PAYOFF_LIMIT {
        let dist = others_distribution(profile, agent);
        let value = |action: u8| -> f64 {
            dist.iter()
                .enumerate()
                .map(|(k, &mass)| mass * f64::from(game.payoff_against(action, k)))
                .sum()
        };
        let (v0, v1) = (value(0), value(1));
        let exact = |value| PayoffEstimate { value, stderr: None };
        return Ok(ActionPayoffs {
            action0: exact(v0),
            action1: exact(v1),
            difference: exact(v1 - v0),
        });
    }
    Ok(monte_carlo_payoffs(
        game,
        profile,
        agent,
        MONTE_CARLO_SAMPLES,
        rng.random(),
    ))
}

fn monte_carlo_payoffs(
    game: &StageGame,
    profile: &MixedProfile,
    agent: usize,
    samples: usize,
    seed: u64,
) -> ActionPayoffs {
    let per_chunk = samples.div_ceil(MONTE_CARLO_CHUNKS);
    // (sum0, sum1, sum of d, sum of d^2) per chunk
    let sums: Vec<[f64; 4]> = (0..MONTE_CARLO_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let mut acc = [0.0; 4];
            for _ in 0..per_chunk {
                let others = profile
                    .probabilities()
                    .iter()
                    .enumerate()
                    .filter(|&(j, &p)| j != agent && rng.random::<f64>() < p)
                    .count();
                let p0 = f64::from(game.payoff_against(0, others));
                let p1 = f64::from(game.payoff_against(1, others));
                let d = p1 - p0;
                acc[0] += p0;
                acc[1] += p1;
                acc[2] += d;
                acc[3] += d * d;
            }
            acc
        })
        .collect();
    let total = (per_chunk * MONTE_CARLO_CHUNKS) as f64;
    let sum = |i: usize| sums.iter().map(|s| s[i]).sum::<f64>();
    let bernoulli = |hits: f64| {
        let mean = hits / total;
        PayoffEstimate {
            value: mean,
            stderr: Some((mean * (1.0 - mean) / (total - 1.0)).sqrt()),
        }
    };
    let d_mean = sum(2) / total;
    let d_var = (sum(3) / total - d_mean * d_mean) * total / (total - 1.0);
    ActionPayoffs {
        action0: bernoulli(sum(0)),
        action1: bernoulli(sum(1)),
        difference: PayoffEstimate {
            value: d_mean,
            stderr: Some((d_var.max(0.0) / total).sqrt()),
        },
    }
}

/// Expected payoff to `agent` for playing `action` against everyone else's
/// mixed strategy; exact up to [`EXACT_PAYOFF_LIMIT`] players.
pub fn expected_payoff<R: Rng + ?Sized>(
    game: &StageGame,
    profile: &MixedProfile,
    agent: usize,
    action: u8,
    rng: &mut R,
) -> Result<PayoffEstimate> {
    if action > 1 {
        return Err(MgError::invalid("action", "actions must be 0 or 1"));
    }
    let payoffs = action_payoffs(game, profile, agent, rng)?;
    Ok(if action == 0 { payoffs.action0 } else { payoffs.action1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tolerance {
    Absolute(f64),
    /// Multiples of the estimate's standard error; exact results need equality
    /// up to `1e-12`.
    StdErrors(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndifferenceCheck {
    pub payoffs: ActionPayoffs,
    pub verified: bool,
}

/// Is `agent` indifferent between its two actions under `profile`?
pub fn verify_indifference<R: Rng + ?Sized>(
    game: &StageGame,
    profile: &MixedProfile,
    agent: usize,
    tolerance: Tolerance,
    rng: &mut R,
) -> Result<IndifferenceCheck> {
    let payoffs = action_payoffs(game, profile, agent, rng)?;
    let gap = payoffs.difference.value.abs();
    let bound = match (tolerance, payoffs.difference.stderr) {
        (Tolerance::Absolute(tol), _) => tol,
        (Tolerance::StdErrors(k), Some(se)) => k * se,
        (Tolerance::StdErrors(_), None) => 1e-12,
    };
    Ok(IndifferenceCheck {
        payoffs,
        verified: gap <= bound,
    })
}

/// Checks the all-0.5 profile of the symmetric `N`-player game.
pub fn verify_symmetric_mixed_ne<R: Rng + ?Sized>(
    agents: usize,
    tolerance: Tolerance,
    rng: &mut R,
) -> Result<IndifferenceCheck> {
    let game = StageGame::new(agents)?;
    let profile = MixedProfile::uniform(agents, 0.5)?;
    verify_indifference(&game, &profile, 0, tolerance, rng)
}

/// Exact mixed-equilibrium test: nobody can gain more than `tolerance` by
/// switching to a pure action.
pub fn is_mixed_nash(game: &StageGame, profile: &MixedProfile, tolerance: f64) -> Result<bool> {
    if game.agents() > EXACT_PAYOFF_LIMIT {
        return Err(MgError::invalid("agents", "exact mixed check limited to N <= 25"));
    }
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    for (i, &p) in profile.probabilities().iter().enumerate() {
        let pay = action_payoffs(game, profile, i, &mut unused)?;
        let current = p * pay.action1.value + (1.0 - p) * pay.action0.value;
        if pay.action0.value.max(pay.action1.value) > current + tolerance {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(N-1)/2` players certain of action 1, `(N-1)/2` certain of action 0,
/// and one free player.
pub fn has_asymmetric_certificate(profile: &MixedProfile) -> bool {
    let n = profile.len();
    if n.is_multiple_of(2) {
        return false;
    }
    let ones = profile.probabilities().iter().filter(|&&p| p == 1.0).count();
    let zeros = profile.probabilities().iter().filter(|&&p| p == 0.0).count();
    let half = (n - 1) / 2;
    match (ones, zeros) {
        (o, z) if o == half && z == half => true,
        // The free player may itself sit at an endpoint.
        (o, z) if o == half + 1 && z == half => true,
        (o, z) if o == half && z == half + 1 => true,
        _ => false,
    }
}

pub fn verify_asymmetric_mixed_ne(game: &StageGame, profile: &MixedProfile) -> Result<bool> {
    Ok(has_asymmetric_certificate(profile) && is_mixed_nash(game, profile, 1e-12)?)
}

/// Every player flips a fair coin each round.
pub fn random_choice_game<R: Rng + ?Sized>(
    agents: usize,
    rounds: usize,
    cutoff: f64,
    memory: u32,
    rng: &mut R,
) -> Result<GameTrace> {
    validate_population(agents, Some(cutoff))?;
    if rounds == 0 {
        return Err(MgError::invalid("rounds", "T must be at least 1"));
    }
    let initial_history = History::random(memory, rng)?;
    let mut history = initial_history;
    let rounds = (0..rounds)
        .map(|_| {
            let actions = (0..agents).map(|_| u8::from(rng.random_bool(0.5))).collect();
            let outcome = resolve_round(actions, history.index(), cutoff);
            history = history.advance(outcome.winning_action);
            outcome
        })
        .collect();
    Ok(GameTrace {
        agents,
        memory,
        cutoff,
        config: None,
        initial_history,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn small_pure_profiles() {
        let g = StageGame::new(3).unwrap();
        assert!(is_pure_nash(&g, &[1, 0, 0]).unwrap());
        assert!(!is_pure_nash(&g, &[1, 1, 1]).unwrap());
        assert!(is_pure_nash(&g, &[1, 2, 0]).is_err());
        assert!(is_pure_nash(&g, &[1, 0]).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(31, 15), 300_540_195);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(0, 0), 1);
    }

    #[test]
    fn count_rejects_even_population() {
        assert!(count_pure_nash(4).is_err());
    }

    #[test]
    fn large_population_uses_formula_only() {
        let c = count_pure_nash(31).unwrap();
        assert_eq!(c.formula, 2 * 300_540_195);
        assert!(!c.cross_checked());
    }

    #[test]
    fn three_player_mixed_payoffs() {
        let g = StageGame::new(3).unwrap();
        let p = MixedProfile::uniform(3, 0.5).unwrap();
        for agent in 0..3 {
            let e1 = expected_payoff(&g, &p, agent, 1, &mut rng()).unwrap();
            let e0 = expected_payoff(&g, &p, agent, 0, &mut rng()).unwrap();
            assert!((e1.value - 0.25).abs() < 1e-15);
            assert!((e0.value - 0.25).abs() < 1e-15);
            assert!(e1.stderr.is_none());
        }
    }

    #[test]
    fn biased_profile_breaks_indifference() {
        let g = StageGame::new(5).unwrap();
        let p = MixedProfile::uniform(5, 0.6).unwrap();
        let check = verify_indifference(&g, &p, 0, Tolerance::Absolute(1e-12), &mut rng()).unwrap();
        assert!(!check.verified);
        // P(Bin(4, .6) >= 3) and P(Bin(4, .6) <= 1)
        assert!((check.payoffs.action0.value - 0.4752).abs() < 1e-12);
        assert!((check.payoffs.action1.value - 0.1792).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_family_for_three_players() {
        let g = StageGame::new(3).unwrap();
        let mut r = rng();
        for x in [0.0, 0.3, 1.0] {
            let p = MixedProfile::new(vec![1.0, 0.0, x]).unwrap();
            assert!(verify_asymmetric_mixed_ne(&g, &p).unwrap());
            let a0 = action_payoffs(&g, &p, 0, &mut r).unwrap();
            assert!((a0.action1.value - (1.0 - x)).abs() < 1e-15);
            assert_eq!(a0.action0.value, 0.0);
            let a1 = action_payoffs(&g, &p, 1, &mut r).unwrap();
            assert!((a1.action0.value - x).abs() < 1e-15);
            assert_eq!(a1.action1.value, 0.0);
            let a2 = action_payoffs(&g, &p, 2, &mut r).unwrap();
            assert_eq!(a2.action0.value, a2.action1.value);
        }
        assert!(!has_asymmetric_certificate(
            &MixedProfile::new(vec![1.0, 1.0, 0.5]).unwrap()
        ));
    }

    #[test]
    fn mixed_profile_validation() {
        assert!(MixedProfile::new(vec![0.5, 1.2]).is_err());
        let g = StageGame::new(3).unwrap();
        let p = MixedProfile::uniform(4, 0.5).unwrap();
        assert!(expected_payoff(&g, &p, 0, 1, &mut rng()).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let g = StageGame::new(31).unwrap();
        let p = MixedProfile::uniform(31, 0.5).unwrap();
        let a = monte_carlo_payoffs(&g, &p, 0, 20_000, 5);
        let b = monte_carlo_payoffs(&g, &p, 0, 20_000, 5);
        assert_eq!(a, b);
        assert!(a.difference.stderr.unwrap() > 0.0);
    }

    #[test]
    fn random_choice_trace_shape() {
        let t = random_choice_game(31, 50, 15.5, 3, &mut rng()).unwrap();
        assert_eq!(t.len(), 50);
        assert!(t.rounds.iter().all(|r| r.actions.len() == 31));
        assert!(random_choice_game(31, 0, 15.5, 3, &mut rng()).is_err());
    }
}
