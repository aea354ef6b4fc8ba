use mg_core::agent::update_scores;
use mg_core::game::{initialize, play_round, run_game, GameConfig};
use mg_core::metrics::volatility_of;
use mg_core::seed::seeded_rng;
use mg_core::variants::{run_gcmg, GcmgConfig};
use mg_core::{build_reduced_strategy_space, Agent, History, ScoringRule, StrategySpace};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn reduced_space_anti_correlation_exhaustive() {
    for m in 1..=4 {
        let space = build_reduced_strategy_space(m).unwrap();
        assert_eq!(space.len(), 1 << (m + 1));
        for pair in space.chunks(2) {
            for idx in 0..1u32 << m {
                let h = History::new(m, idx).unwrap();
                assert_ne!(pair[0].predict(&h).unwrap(), pair[1].predict(&h).unwrap());
            }
        }
    }
}

#[test]
fn strategies_are_immutable_over_a_game() {
    let cfg = GameConfig::new(31, 3, 2, 2000, 21).with_cutoff(20.0);
    let mut rng = seeded_rng(cfg.seed);
    let (mut history, mut agents) = initialize(&cfg, &mut rng).unwrap();
    let before: Vec<_> = agents.iter().map(|a| a.strategies().to_vec()).collect();
    for _ in 0..cfg.rounds {
        let r = play_round(&agents, &history, 20.0, &mut rng).unwrap();
        update_scores(&mut agents, &history, r.winning_action, cfg.scoring).unwrap();
        history = history.advance(r.winning_action);
    }
    let after: Vec<_> = agents.iter().map(|a| a.strategies().to_vec()).collect();
    assert_eq!(before, after);
}

#[test]
fn pure_equilibrium_played_repeatedly_has_zero_volatility() {
    let v = volatility_of(&[3; 200], 7, 0).unwrap();
    assert_eq!(v.sigma, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pair_scores_conserved_under_plus_minus_one(m in 1u32..=5, pair in 0usize..32, winners in proptest::collection::vec(0u8..2, 1..200)) {
        let space = build_reduced_strategy_space(m).unwrap();
        let k = (pair % (1 << m)) * 2;
        let mut agent = Agent::new(vec![space[k].clone(), space[k + 1].clone()]).unwrap();
        let mut h = History::new(m, 0).unwrap();
        for w in winners {
            agent.update_scores(&h, w, ScoringRule::PlusMinusOne).unwrap();
            prop_assert_eq!(agent.scores()[0] + agent.scores()[1], 0);
            h = h.advance(w);
        }
    }

    #[test]
    fn winners_are_the_cutoff_minority(n in (1usize..20).prop_map(|k| 2 * k + 1), seed in any::<u64>(), t in 1usize..50) {
        let trace = GameConfig::new(n, 2, 2, t, seed).run().unwrap();
        for r in &trace.rounds {
            let w = r.winners();
            prop_assert!((w as f64) < n as f64 / 2.0);
            let a = r.attendance;
            prop_assert_eq!(w, if (a as f64) < trace.cutoff { a } else { n as u32 - a });
        }
    }

    #[test]
    fn replay_is_a_pure_function(seed in any::<u64>(), m in 1u32..6, reduced in any::<bool>()) {
        let space = if reduced { StrategySpace::Reduced } else { StrategySpace::Full };
        let cfg = GameConfig::new(15, m, 2, 100, seed).with_strategy_space(space);
        prop_assert_eq!(cfg.run().unwrap(), cfg.run().unwrap());
        let mut rng = seeded_rng(seed);
        prop_assert_eq!(run_game(&cfg, &mut rng).unwrap(), cfg.run().unwrap());
    }

    #[test]
    fn common_score_shift_keeps_selection(seed in any::<u64>(), shift in -1000i64..1000, scores in proptest::collection::vec(-5i64..5, 3)) {
        let mut rng = seeded_rng(seed);
        let strategies = mg_core::draw_strategies(&mut rng, 3, 3, StrategySpace::Full).unwrap();
        let base = Agent::with_scores(strategies.clone(), scores.clone()).unwrap();
        let shifted = Agent::with_scores(strategies, scores.iter().map(|s| s + shift).collect()).unwrap();
        let h = History::new(3, rng.random_range(0..8)).unwrap();
        let mut r1 = seeded_rng(seed ^ 1);
        let mut r2 = seeded_rng(seed ^ 1);
        for _ in 0..20 {
            prop_assert_eq!(base.select_action(&h, &mut r1).unwrap(), shifted.select_action(&h, &mut r2).unwrap());
        }
    }

    #[test]
    fn gcmg_scores_every_agent_like_the_core(seed in any::<u64>()) {
        // With epsilon = 0 some agents sit out; scoring must still match plain update_scores.
        let game = GameConfig::new(11, 2, 3, 60, seed).with_scoring(ScoringRule::PlusMinusOne);
        let out = run_gcmg(&GcmgConfig { game: game.clone(), threshold: 0.0 }).unwrap();
        let mut rng = seeded_rng(seed);
        let (_, mut agents) = initialize(&game, &mut rng).unwrap();
        for (r, &active) in out.trace.rounds.iter().zip(&out.active_counts) {
            prop_assert_eq!(active as usize, agents.iter().filter(|a| a.best_score() >= 0).count());
            update_scores(&mut agents, &History::new(2, r.history).unwrap(), r.winning_action, game.scoring).unwrap();
        }
    }
}
