//! Coalescing Brownian motions: an exact two-particle sampler, a bridge-corrected
//! Euler scheme for any number of particles, and grid restrictions of the Arratia flow.

mod euler;
mod flow;
mod pair;

pub use euler::{advance_blocks, coalescing_bm};
pub use flow::{flow_grid, FlowGrid};
pub use pair::{coalescing_pair_exact, PairSample};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::partition::IntervalPartition;

/// Ordered real particle positions with their coalescence partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmState {
    positions: Vec<f64>,
    partition: IntervalPartition,
    pub time: f64,
}

impl BmState {
    /// State whose blocks are the runs of exactly equal positions.
    pub fn new(positions: &[f64]) -> Result<Self> {
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(invalid("positions", "must be finite"));
        }
        if positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("positions", "must be nondecreasing"));
        }
        Ok(Self {
            positions: positions.to_vec(),
            partition: IntervalPartition::from_sorted(positions),
            time: 0.0,
        })
    }

    pub fn with_partition(positions: &[f64], partition: IntervalPartition) -> Result<Self> {
        let s = Self::new(positions)?;
        if s.partition != partition {
            return Err(Error::InvalidState(
                "positions must be equal if and only if indices share a block".into(),
            ));
        }
        Ok(s)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn partition(&self) -> &IntervalPartition {
        &self.partition
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn all_coalesced(&self) -> bool {
        self.partition.len() <= 1
    }

    pub fn to_blocks(&self) -> FreeBlocks {
        FreeBlocks {
            pos: self.partition.leaders().map(|i| self.positions[i]).collect(),
            size: self.partition.blocks().map(|b| b.len()).collect(),
        }
    }

    pub fn from_blocks(blocks: &FreeBlocks, time: f64) -> Self {
        let mut ends = Vec::with_capacity(blocks.len());
        let mut positions = Vec::with_capacity(blocks.size.iter().sum());
        for (&p, &s) in blocks.pos.iter().zip(&blocks.size) {
            positions.extend(std::iter::repeat_n(p, s));
            ends.push(positions.len());
        }
        Self {
            positions,
            partition: IntervalPartition::from_block_ends(ends).expect("positive sizes"),
            time,
        }
    }
}

/// Compact form of a coalescing system: one entry per free block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeBlocks {
    /// Strictly increasing leader positions.
    pub pos: Vec<f64>,
    /// Number of original particles carried by each block.
    pub size: Vec<usize>,
}

impl FreeBlocks {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    /// Blocks for sorted positions, merging exact ties.
    pub fn from_sorted(positions: &[f64]) -> Self {
        let mut b = FreeBlocks::default();
        for &x in positions {
            if b.pos.last() == Some(&x) {
                *b.size.last_mut().expect("non-empty") += 1;
            } else {
                b.pos.push(x);
                b.size.push(1);
            }
        }
        b
    }
}
