//! Interval partitions of `{0, .., m-1}` into blocks of consecutive indices.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blocks stored by their exclusive end indices: `ends = [e_1 < e_2 < .. < e_h = m]`,
/// block `k` is `e_{k-1} .. e_k` with `e_0 = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalPartition {
    ends: Vec<usize>,
}

impl IntervalPartition {
    pub fn singletons(m: usize) -> Self {
        Self {
            ends: (1..=m).collect(),
        }
    }

    pub fn single_block(m: usize) -> Self {
        Self {
            ends: if m == 0 { vec![] } else { vec![m] },
        }
    }

    pub fn from_block_ends(ends: Vec<usize>) -> Result<Self> {
        if ends.windows(2).any(|w| w[0] >= w[1]) || ends.first() == Some(&0) {
            return Err(Error::InvalidState(format!(
                "block ends must be strictly increasing and positive: {ends:?}"
            )));
        }
        Ok(Self { ends })
    }

    /// Partition whose blocks are the runs of equal values in a nondecreasing sequence.
    pub fn from_sorted<T: PartialEq>(values: &[T]) -> Self {
        let mut ends = Vec::new();
        for i in 1..values.len() {
            if values[i] != values[i - 1] {
                ends.push(i);
            }
        }
        if !values.is_empty() {
            ends.push(values.len());
        }
        Self { ends }
    }

    /// Number of indices covered.
    pub fn size(&self) -> usize {
        self.ends.last().copied().unwrap_or(0)
    }

    /// `l(pi)`, the number of blocks.
    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn block_ends(&self) -> &[usize] {
        &self.ends
    }

    pub fn block(&self, k: usize) -> Range<usize> {
        let start = if k == 0 { 0 } else { self.ends[k - 1] };
        start..self.ends[k]
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.ends.len()).map(move |k| self.block(k))
    }

    /// Block leaders `min A_k`, strictly increasing.
    pub fn leaders(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks().map(|b| b.start)
    }

    /// Index of the block containing `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.ends.partition_point(|&e| e <= i)
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of(i) == self.block_of(j)
    }

    /// Merges block `k` with block `k + 1`.
    pub fn merge_with_next(&mut self, k: usize) {
        assert!(k + 1 < self.ends.len(), "no block after {k}");
        self.ends.remove(k);
    }

    /// True if every block of `finer` lies inside a block of `self`.
    pub fn is_coarsening_of(&self, finer: &IntervalPartition) -> bool {
        self.size() == finer.size() && self.ends.iter().all(|e| finer.ends.contains(e))
    }
}
