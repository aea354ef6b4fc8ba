//! Strategy tables and the full and reduced strategy spaces.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::history::{check_memory, History};

/// Largest supported brain size; a full table then has 65 536 entries.
pub const MAX_MEMORY: u32 = 16;

/// Where agents draw their strategies from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategySpace {
    /// All `2^(2^m)` lookup tables, drawn uniformly.
    #[default]
    Full,
    /// The `2^(m+1)` anti-correlated pairs, drawn without replacement.
    Reduced,
}

/// Lookup table from every `m`-bit history index to a predicted winning action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    memory: u32,
    table: Vec<u8>,
}

impl Strategy {
    pub fn from_table(table: Vec<u8>) -> Result<Self> {
        let len = table.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(MgError::invalid(
                "strategy",
                format!("table length {len} is not 2^m for m >= 1"),
            ));
        }
        let memory = len.trailing_zeros();
        check_memory(memory)?;
        if let Some(bad) = table.iter().find(|&&a| a > 1) {
            return Err(MgError::invalid("strategy", format!("action {bad} is not binary")));
        }
        Ok(Strategy { memory, table })
    }

    /// Table whose every entry is `action`.
    pub fn constant(memory: u32, action: u8) -> Result<Self> {
        check_memory(memory)?;
        Self::from_table(vec![action; 1 << memory])
    }

    /// Predicts the most recent winner again: `h -> last bit of h`.
    pub fn follow_last_winner(memory: u32) -> Result<Self> {
        check_memory(memory)?;
        Ok(Strategy {
            memory,
            table: (0..1u32 << memory).map(|mu| (mu & 1) as u8).collect(),
        })
    }

    pub fn random<R: Rng + ?Sized>(memory: u32, rng: &mut R) -> Result<Self> {
        check_memory(memory)?;
        let table = (0..1usize << memory).map(|_| rng.random_range(0..2u8)).collect();
        Ok(Strategy { memory, table })
    }

    pub fn memory(&self) -> u32 {
        self.memory
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    /// Bitwise complement: opposite prediction on every history.
    pub fn complement(&self) -> Self {
        Strategy {
            memory: self.memory,
            table: self.table.iter().map(|a| 1 - a).collect(),
        }
    }

    pub fn predict(&self, history: &History) -> Result<u8> {
        if history.memory() != self.memory {
            return Err(MgError::invalid(
                "history",
                format!(
                    "history has {} bits but strategy expects {}",
                    history.memory(),
                    self.memory
                ),
            ));
        }
        Ok(self.predict_index(history.index()))
    }

    /// Prediction for a raw history index; the caller guarantees the range.
    #[inline]
    pub fn predict_index(&self, index: u32) -> u8 {
        self.table[index as usize]
    }
}

/// Builds the reduced strategy space for brain size `memory`.
///
/// The `2^m` base strategies are the Walsh functions `h -> parity(k & h)`,
/// which are pairwise distinct and mutually uncorrelated. Each is followed
/// immediately by its complement, so the result is `[A_0, !A_0, A_1, !A_1, ...]`.
pub fn build_reduced_strategy_space(memory: u32) -> Result<Vec<Strategy>> {
    check_memory(memory)?;
    let size = 1u32 << memory;
    let mut space = Vec::with_capacity(2 * size as usize);
    for k in 0..size {
        let base = Strategy {
            memory,
            table: (0..size).map(|h| ((k & h).count_ones() & 1) as u8).collect(),
        };
        let anti = base.complement();
        space.push(base);
        space.push(anti);
    }
    Ok(space)
}

/// Draws `count` strategies for one agent.
pub fn draw_strategies<R: Rng + ?Sized>(
    rng: &mut R,
    memory: u32,
    count: usize,
    space: StrategySpace,
) -> Result<Vec<Strategy>> {
    check_memory(memory)?;
    match space {
        StrategySpace::Full => (0..count).map(|_| Strategy::random(memory, rng)).collect(),
        StrategySpace::Reduced => {
            let pool = build_reduced_strategy_space(memory)?;
            if count > pool.len() {
                return Err(MgError::invalid(
                    "strategies_per_agent",
                    format!(
                        "cannot draw {count} distinct strategies from a reduced space of {}",
                        pool.len()
                    ),
                ));
            }
            Ok(sample(rng, pool.len(), count)
                .into_iter()
                .map(|i| pool[i].clone())
                .collect())
        }
    }
}
