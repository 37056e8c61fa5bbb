use serde::{Deserialize, Serialize};

use super::euler::advance_unchecked;
use super::FreeBlocks;
use crate::error::{check_positive, invalid, Result};
use crate::randkit::RngStream;

/// Restriction of the time-`t` flow map to the grid `lo + k 2^-level` inside `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowGrid {
    pub level: u32,
    pub lo: f64,
    pub hi: f64,
    pub t: f64,
    /// Distinct terminal positions, strictly increasing.
    pub images: Vec<f64>,
    /// `boundaries[i]` is the largest grid point mapped to `images[i]`.
    pub boundaries: Vec<f64>,
    /// For each grid point, the index of its image.
    pub block_of: Vec<usize>,
}

impl FlowGrid {
    pub fn spacing(&self) -> f64 {
        (-f64::from(self.level)).exp2()
    }

    pub fn grid_len(&self) -> usize {
        self.block_of.len()
    }

    pub fn grid_point(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.spacing()
    }

    /// Half-open cell of initial positions carried to `images[i]`, where each grid point
    /// represents the spacing-wide cell to its left.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let left = if i == 0 { self.lo - self.spacing() } else { self.boundaries[i - 1] };
        (left, self.boundaries[i])
    }

    /// Rows of (grid point, image, block id).
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.block_of.iter().enumerate().map(|(k, &b)| (self.grid_point(k), self.images[b], b))
    }
}

pub fn flow_grid(level: u32, lo: f64, hi: f64, t: f64, step: f64, rng: &mut RngStream) -> Result<FlowGrid> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid("lo/hi", format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if level > 40 {
        return Err(invalid("level", "must be at most 40"));
    }
    check_positive("t", t)?;
    check_positive("step", step)?;
    let h = (-f64::from(level)).exp2();
    let count = ((hi - lo) / h + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|k| lo + k as f64 * h).collect();
    let mut blocks = FreeBlocks::from_sorted(&grid);
    advance_unchecked(&mut blocks, t, step, rng);
    let mut block_of = Vec::with_capacity(count);
    let mut boundaries = Vec::with_capacity(blocks.len());
    for (b, &s) in blocks.size.iter().enumerate() {
        block_of.extend(std::iter::repeat_n(b, s));
        boundaries.push(grid[block_of.len() - 1]);
    }
    Ok(FlowGrid { level, lo, hi, t, images: blocks.pos, boundaries, block_of })
}
