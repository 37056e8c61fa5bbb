//! Continuous-time p-simple coalescing random walks on the integers and on the
//! half-integers, balls-in-boxes indicator arrays, generator evaluation and an
//! exact uniformization oracle for the array law.
//!
//! Positions are stored in half-units (twice the coordinate), so both lattices
//! share one integer representation: integer sites are even, half-integer sites odd.

mod generator;
mod oracle;
mod walk;

pub use generator::{apply_generator, apply_generator_g, check_generator_duality, gbar};
pub use oracle::{array_law_oracle, array_law_oracle_backward, walk_law, ArrayLaw, WalkLaw};
pub use walk::{simulate_cw, simulate_cw_trace};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::partition::IntervalPartition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lattice {
    /// The integers.
    Integer,
    /// The shifted lattice of half-integers `Z + 1/2`.
    HalfInteger,
}

impl Lattice {
    fn parity(self) -> i64 {
        match self {
            Lattice::Integer => 0,
            Lattice::HalfInteger => 1,
        }
    }

    /// Converts a coordinate to half-units, rejecting points off this lattice.
    pub fn to_half_units(self, x: f64) -> Result<i64> {
        let h = 2.0 * x;
        if !h.is_finite() || h.fract() != 0.0 || h.abs() > 1e15 {
            return Err(invalid("position", format!("{x} is not a lattice point")));
        }
        let h = h as i64;
        if h.rem_euclid(2) != self.parity() {
            return Err(invalid("position", format!("{x} is not on the {self:?} lattice")));
        }
        Ok(h)
    }
}

pub(crate) fn to_f64(h: i64) -> f64 {
    h as f64 * 0.5
}

/// Ordered particle configuration on one of the two lattices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    positions: Vec<i64>,
    lattice: Lattice,
    partition: IntervalPartition,
    pub time: f64,
}

impl LatticeState {
    /// State whose partition is read off from coincident positions.
    pub fn new(positions: &[f64], lattice: Lattice) -> Result<Self> {
        let half = positions
            .iter()
            .map(|&x| lattice.to_half_units(x))
            .collect::<Result<Vec<_>>>()?;
        Self::from_half_units(half, lattice)
    }

    pub fn from_half_units(positions: Vec<i64>, lattice: Lattice) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("positions", "must be nondecreasing"));
        }
        if positions.iter().any(|h| h.rem_euclid(2) != lattice.parity()) {
            return Err(invalid("positions", format!("not on the {lattice:?} lattice")));
        }
        let partition = IntervalPartition::from_sorted(&positions);
        Ok(Self {
            positions,
            lattice,
            partition,
            time: 0.0,
        })
    }

    /// State with an explicit partition; positions must be equal exactly within blocks.
    pub fn with_partition(positions: &[f64], lattice: Lattice, partition: IntervalPartition) -> Result<Self> {
        let s = Self::new(positions, lattice)?;
        if partition != s.partition {
            return Err(Error::InvalidState(format!(
                "partition {:?} does not match coincidences of {positions:?}; \
                 positions must be equal if and only if indices share a block",
                partition.block_ends()
            )));
        }
        Ok(s)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
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

    pub fn half_units(&self) -> &[i64] {
        &self.positions
    }

    pub fn positions(&self) -> Vec<f64> {
        self.positions.iter().map(|&h| to_f64(h)).collect()
    }

    /// Leader positions, in half-units.
    pub(crate) fn free_half_units(&self) -> Vec<i64> {
        self.partition.leaders().map(|i| self.positions[i]).collect()
    }
}

/// `K_pi`: positions of the block leaders.
pub fn kpi_map(state: &LatticeState) -> Vec<f64> {
    state.free_half_units().into_iter().map(to_f64).collect()
}

/// Inverse of `K_pi`: every index takes the position of its block's leader.
pub fn kpi_inv(free: &[f64], partition: &IntervalPartition) -> Result<Vec<f64>> {
    if free.len() != partition.len() {
        return Err(invalid(
            "free",
            format!("expected {} leader positions, got {}", partition.len(), free.len()),
        ));
    }
    let mut out = vec![0.0; partition.size()];
    for (k, b) in partition.blocks().enumerate() {
        out[b].fill(free[k]);
    }
    Ok(out)
}

pub(crate) fn kpi_inv_half(free: &[i64], partition: &IntervalPartition, out: &mut [i64]) {
    for (k, b) in partition.blocks().enumerate() {
        out[b].fill(free[k]);
    }
}

/// `m x (n-1)` balls-in-boxes array, row-major; bit `(i, j)` is set when ball `i`
/// lies in box `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndicatorArray {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl IndicatorArray {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Integer code with bit `(i, j)` at position `i * cols + j`.
    pub fn code(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &b)| acc | (usize::from(b) << k))
    }

    pub fn from_code(code: usize, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: (0..rows * cols).map(|k| code >> k & 1 == 1).collect(),
        }
    }
}

/// Code of the array `1{ball_i in ]box_j, box_{j+1}]}` in half-units.
#[inline]
pub(crate) fn array_code(balls: &[i64], boxes: &[i64]) -> usize {
    let cols = boxes.len().saturating_sub(1);
    let mut code = 0usize;
    for (i, &x) in balls.iter().enumerate() {
        // Boxes are nondecreasing, so at most one box (the last one with y_j < x) can hold x.
        let j = boxes.partition_point(|&y| y < x);
        if j >= 1 && j <= cols && x <= boxes[j] {
            code |= 1 << (i * cols + j - 1);
        }
    }
    code
}

fn check_nondecreasing(name: &str, v: &[i64]) -> Result<()> {
    if v.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid(name, "must be nondecreasing"));
    }
    Ok(())
}

/// Which fixed half-integer boxes the walkers of an integer-lattice state occupy.
pub fn indicator_forward(state: &LatticeState, boxes: &[f64]) -> Result<IndicatorArray> {
    if state.lattice != Lattice::Integer {
        return Err(invalid("state", "forward walkers live on the integer lattice"));
    }
    let y = boxes
        .iter()
        .map(|&b| Lattice::HalfInteger.to_half_units(b))
        .collect::<Result<Vec<_>>>()?;
    check_nondecreasing("boxes", &y)?;
    let code = array_code(&state.positions, &y);
    Ok(IndicatorArray::from_code(code, state.len(), y.len().saturating_sub(1)))
}

/// Which boxes spanned by half-integer walkers contain the fixed integer points.
pub fn indicator_backward(points: &[f64], state: &LatticeState) -> Result<IndicatorArray> {
    if state.lattice != Lattice::HalfInteger {
        return Err(invalid("state", "backward walkers live on the half-integer lattice"));
    }
    let x = points
        .iter()
        .map(|&p| Lattice::Integer.to_half_units(p))
        .collect::<Result<Vec<_>>>()?;
    check_nondecreasing("points", &x)?;
    let code = array_code(&x, &state.positions);
    Ok(IndicatorArray::from_code(code, x.len(), state.len().saturating_sub(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(xs: &[f64]) -> LatticeState {
        LatticeState::new(xs, Lattice::Integer).unwrap()
    }

    #[test]
    fn kpi_examples() {
        assert_eq!(kpi_map(&int(&[0.0, 0.0, 3.0])), vec![0.0, 3.0]);
        assert_eq!(kpi_map(&int(&[1.0, 2.0, 5.0])), vec![1.0, 2.0, 5.0]);
        assert_eq!(kpi_map(&int(&[2.0, 2.0, 2.0])), vec![2.0]);
        let s = int(&[-1.0, -1.0, 4.0, 4.0, 7.0]);
        assert_eq!(kpi_inv(&kpi_map(&s), s.partition()).unwrap(), s.positions());
        assert!(kpi_inv(&[1.0], s.partition()).is_err());
    }

    #[test]
    fn state_invariants_enforced() {
        assert!(LatticeState::new(&[1.0, 0.0], Lattice::Integer).is_err());
        assert!(LatticeState::new(&[0.5], Lattice::Integer).is_err());
        assert!(LatticeState::new(&[1.0], Lattice::HalfInteger).is_err());
        let bad = LatticeState::with_partition(&[0.0, 0.0], Lattice::Integer, IntervalPartition::singletons(2));
        assert!(bad.is_err());
        let ok = LatticeState::with_partition(&[0.0, 0.0], Lattice::Integer, IntervalPartition::single_block(2));
        assert_eq!(ok.unwrap().partition().len(), 1);
    }

    #[test]
    fn forward_indicator_examples() {
        let a = indicator_forward(&int(&[0.0]), &[-0.5, 0.5]).unwrap();
        assert!(a.get(0, 0));
        let a = indicator_forward(&int(&[0.0]), &[0.5, 1.5]).unwrap();
        assert!(!a.get(0, 0));
        let a = indicator_forward(&int(&[1.0, 1.0]), &[-0.5, 0.5, 1.5]).unwrap();
        assert_eq!((a.get(0, 0), a.get(0, 1)), (false, true));
        assert_eq!((a.get(1, 0), a.get(1, 1)), (false, true));
        assert!(indicator_forward(&int(&[0.0]), &[0.5, -0.5]).is_err());
        assert!(indicator_forward(&int(&[0.0]), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn backward_indicator_examples() {
        let half = |xs: &[f64]| LatticeState::new(xs, Lattice::HalfInteger).unwrap();
        assert!(indicator_backward(&[0.0], &half(&[-0.5, 0.5])).unwrap().get(0, 0));
        assert!(!indicator_backward(&[0.0], &half(&[0.5, 1.5])).unwrap().get(0, 0));
        let a = indicator_backward(&[1.0, 1.0], &half(&[-0.5, 0.5, 1.5])).unwrap();
        assert_eq!(a.bits(), &[false, true, false, true]);
        // coalesced box walkers span an empty interval
        let a = indicator_backward(&[0.0], &half(&[0.5, 0.5])).unwrap();
        assert!(!a.get(0, 0));
    }

    #[test]
    fn codes_roundtrip() {
        for code in 0..64 {
            assert_eq!(IndicatorArray::from_code(code, 2, 3).code(), code);
        }
    }
}
