//! Exact marginal law of a coalescing walk by uniformization.
//!
//! The number of free blocks never increases, so the initial block count `l0`
//! dominates the total jump rate. Conditioning on `J ~ Poisson(l0 t)` uniformized
//! events, each event moves a uniformly chosen one of `l0` slots; slots beyond the
//! current block count are self-loops. The chain is truncated two ways: at most
//! `jump_cap` events, and positions confined to the initial range widened by
//! `truncation_radius` sites. Both truncations only lose probability mass, and the
//! lost mass is the reported error bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_range, invalid, Error, Result};

use super::{array_code, Lattice, LatticeState};

const MAX_BITS: usize = 12;

#[derive(Clone, Debug)]
pub struct WalkLaw {
    /// Terminal free-block configurations `(leader positions, block sizes)` in half-units.
    pub states: BTreeMap<(Vec<i64>, Vec<usize>), f64>,
    pub poisson_tail: f64,
    pub escaped: f64,
}

impl WalkLaw {
    pub fn error_bound(&self) -> f64 {
        self.poisson_tail + self.escaped
    }
}

fn poisson_log_pmf(j: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let lgam: f64 = (1..=j).map(|k| (k as f64).ln()).sum();
    -mean + j as f64 * mean.ln() - lgam
}

/// Law of the walk at time `t`; positions outside the window count as escaped mass.
pub fn walk_law(
    initial: &LatticeState,
    right_prob: f64,
    t: f64,
    truncation_radius: usize,
    jump_cap: usize,
) -> Result<WalkLaw> {
    check_range("p", right_prob, 0.0, 1.0)?;
    check_nonneg("t", t)?;
    let free = initial.free_half_units();
    let sizes: Vec<usize> = initial.partition().blocks().map(|b| b.len()).collect();
    let l0 = free.len();
    let mut states = BTreeMap::new();
    if l0 == 0 {
        states.insert((free, sizes), 1.0);
        return Ok(WalkLaw { states, poisson_tail: 0.0, escaped: 0.0 });
    }
    let lo = free[0] - 2 * truncation_radius as i64;
    let hi = free[l0 - 1] + 2 * truncation_radius as i64;
    let mean = l0 as f64 * t;

    let mut current: BTreeMap<(Vec<i64>, Vec<usize>), f64> = BTreeMap::new();
    current.insert((free, sizes), 1.0);
    let mut escaped = 0.0;
    let mut weight_used = 0.0;
    let slot = 1.0 / l0 as f64;
    for j in 0..=jump_cap {
        let w = poisson_log_pmf(j, mean).exp();
        weight_used += w;
        for (k, &pr) in &current {
            *states.entry(k.clone()).or_insert(0.0) += w * pr;
        }
        if j == jump_cap {
            break;
        }
        // Mass still in `current` that is later lost contributes to the bound through
        // the remaining Poisson weights, which sum to at most one.
        let mut next: BTreeMap<(Vec<i64>, Vec<usize>), f64> = BTreeMap::new();
        for ((pos, size), &pr) in &current {
            let l = pos.len();
            if l < l0 {
                *next.entry((pos.clone(), size.clone())).or_insert(0.0) += pr * (l0 - l) as f64 * slot;
            }
            for b in 0..l {
                for (right, q) in [(true, right_prob), (false, 1.0 - right_prob)] {
                    if q == 0.0 {
                        continue;
                    }
                    let mut p2 = pos.clone();
                    let mut s2 = size.clone();
                    if right {
                        p2[b] += 2;
                        if b + 1 < l && p2[b + 1] == p2[b] {
                            s2[b] += s2.remove(b + 1);
                            p2.remove(b + 1);
                        }
                    } else {
                        p2[b] -= 2;
                        if b > 0 && p2[b - 1] == p2[b] {
                            s2[b - 1] += s2.remove(b);
                            p2.remove(b);
                        }
                    }
                    let mass = pr * slot * q;
                    if p2[0] < lo || p2[p2.len() - 1] > hi {
                        escaped += mass;
                    } else {
                        *next.entry((p2, s2)).or_insert(0.0) += mass;
                    }
                }
            }
        }
        current = next;
    }
    let poisson_tail = (1.0 - weight_used).max(0.0);
    Ok(WalkLaw { states, poisson_tail, escaped })
}

/// Exact law of an indicator array over all `2^(m(n-1))` codes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrayLaw {
    pub probs: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub error_bound: f64,
}

fn expand(free: &[i64], sizes: &[usize]) -> Vec<i64> {
    free.iter()
        .zip(sizes)
        .flat_map(|(&p, &s)| std::iter::repeat_n(p, s))
        .collect()
}

fn check_bits(m: usize, n: usize) -> Result<usize> {
    let bits = m * n.saturating_sub(1);
    if bits > MAX_BITS {
        return Err(invalid("m, n", format!("m(n-1) = {bits} exceeds {MAX_BITS} bits")));
    }
    Ok(bits)
}

fn finish(law: WalkLaw, bits: usize, rows: usize, cols: usize, tolerance: f64, code_of: impl Fn(&[i64]) -> usize) -> Result<ArrayLaw> {
    let bound = law.error_bound();
    if bound > tolerance {
        return Err(Error::Truncation { bound, tolerance });
    }
    let mut probs = vec![0.0; 1 << bits];
    for ((free, sizes), pr) in &law.states {
        probs[code_of(&expand(free, sizes))] += pr;
    }
    Ok(ArrayLaw { probs, rows, cols, error_bound: bound })
}

/// Law of `1{X_i(t) in ]y_j, y_{j+1}]}` for the p-walk `X` on the integers started at
/// `initial`, with fixed half-integer boxes `boxes`.
pub fn array_law_oracle(
    initial: &[f64],
    p: f64,
    t: f64,
    boxes: &[f64],
    truncation_radius: usize,
    jump_cap: usize,
    tolerance: f64,
) -> Result<ArrayLaw> {
    let bits = check_bits(initial.len(), boxes.len())?;
    let x0 = LatticeState::new(initial, Lattice::Integer)?;
    let y = LatticeState::new(boxes, Lattice::HalfInteger)?;
    let law = walk_law(&x0, p, t, truncation_radius, jump_cap)?;
    let yh = y.half_units().to_vec();
    finish(law, bits, initial.len(), boxes.len().saturating_sub(1), tolerance, |x| array_code(x, &yh))
}

/// Law of `1{x_i in ]Y_j(t), Y_{j+1}(t)]}` for the (1-p)-walk `Y` on the half-integers
/// started at `boxes`, with fixed integer points.
pub fn array_law_oracle_backward(
    points: &[f64],
    p: f64,
    t: f64,
    boxes: &[f64],
    truncation_radius: usize,
    jump_cap: usize,
    tolerance: f64,
) -> Result<ArrayLaw> {
    let bits = check_bits(points.len(), boxes.len())?;
    let x = LatticeState::new(points, Lattice::Integer)?;
    let y0 = LatticeState::new(boxes, Lattice::HalfInteger)?;
    check_range("p", p, 0.0, 1.0)?;
    let law = walk_law(&y0, 1.0 - p, t, truncation_radius, jump_cap)?;
    let xh = x.half_units().to_vec();
    finish(law, bits, points.len(), boxes.len().saturating_sub(1), tolerance, |y| array_code(&xh, y))
}
