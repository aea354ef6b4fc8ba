//! Sliding window of the last `m` winning actions.
//!
//! The window is stored in index form: the most recent winner is the least
//! significant bit, so the bit string read left to right (oldest first) is
//! the binary expansion of the index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::strategy::MAX_MEMORY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct History {
    memory: u32,
    index: u32,
}

impl History {
    pub fn new(memory: u32, index: u32) -> Result<Self> {
        check_memory(memory)?;
        if u64::from(index) >= 1u64 << memory {
            return Err(MgError::invalid(
                "history",
                format!("index {index} does not fit in {memory} bits"),
            ));
        }
        Ok(History { memory, index })
    }

    /// Builds a history from its bits, oldest first.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let memory = u32::try_from(bits.len()).map_err(|_| MgError::invalid("history", "too many bits"))?;
        check_memory(memory)?;
        let mut index = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(MgError::invalid("history", format!("symbol {b} is not binary")));
            }
            index = (index << 1) | u32::from(b);
        }
        Ok(History { memory, index })
    }

    /// Parses a string such as `"0110"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(MgError::invalid("history", format!("symbol {other:?} is not binary"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bits(&bits)
    }

    pub fn random<R: Rng + ?Sized>(memory: u32, rng: &mut R) -> Result<Self> {
        check_memory(memory)?;
        let index = rng.random_range(0..(1u64 << memory)) as u32;
        Ok(History { memory, index })
    }

    pub fn memory(&self) -> u32 {
        self.memory
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// Bits oldest first.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.memory).rev().map(|k| ((self.index >> k) & 1) as u8).collect()
    }

    /// Drops the oldest bit and appends `winner`.
    pub fn advance(self, winner: u8) -> Self {
        debug_assert!(winner <= 1);
        let mask = ((1u64 << self.memory) - 1) as u32;
        History {
            memory: self.memory,
            index: ((self.index << 1) | u32::from(winner & 1)) & mask,
        }
    }
}

impl std::fmt::Display for History {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_memory(memory: u32) -> Result<()> {
    if memory == 0 || memory > MAX_MEMORY {
        return Err(MgError::invalid(
            "memory",
            format!("brain size must be in 1..={MAX_MEMORY}, got {memory}"),
        ));
    }
    Ok(())
}
