//! Minority-game simulation toolkit: the basic iterated game, its variants,
//! statistical observables, stage-game equilibria and an edge-computing
//! offloading scenario.
//!
//! Every run is a pure function of its configuration and seed.

pub mod agent;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod history;
pub mod metrics;
pub mod offload;
pub mod seed;
pub mod strategy;
pub mod variants;

pub use agent::{Agent, ScoringRule};
pub use error::{MgError, Result};
pub use game::{play_round, run_game, GameConfig, GameTrace, RoundOutcome};
pub use history::History;
pub use strategy::{build_reduced_strategy_space, draw_strategies, Strategy, StrategySpace};
