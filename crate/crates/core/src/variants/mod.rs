//! Variants of the basic game: evolutionary (genetic), grand canonical, and
//! the multiple-choice simplex game. The arbitrary cut-off variant is the
//! `cutoff` field of [`crate::GameConfig`].

pub mod emg;
pub mod gcmg;
pub mod simplex;

pub use emg::{emg_step, run_emg, CommonStrategy, EmgAgent, EmgConfig, EmgRound, EmgTrace, GeneInit, MutationRule};
pub use gcmg::{gcmg_step, run_gcmg, GcmgConfig, GcmgRound, GcmgTrace};
pub use simplex::{
    exponential_learning_update, run_simplex, simplex_step, SimplexAgent, SimplexConfig, SimplexHistory, SimplexRound,
    SimplexTrace,
};
