use crate::error::{check_nonneg, check_range, Result};
use crate::partition::IntervalPartition;
use crate::randkit::RngStream;

use super::{kpi_inv_half, LatticeState};

/// Free blocks of a coalescing walk: leader positions (half-units) and block sizes.
struct Blocks {
    pos: Vec<i64>,
    size: Vec<usize>,
}

impl Blocks {
    fn of(state: &LatticeState) -> Self {
        Self {
            pos: state.free_half_units(),
            size: state.partition.blocks().map(|b| b.len()).collect(),
        }
    }

    /// Moves block `k` one site and merges it into the neighbour it lands on.
    fn jump(&mut self, k: usize, right: bool) {
        if right {
            self.pos[k] += 2;
            if k + 1 < self.pos.len() && self.pos[k + 1] == self.pos[k] {
                self.size[k] += self.size.remove(k + 1);
                self.pos.remove(k + 1);
            }
        } else {
            self.pos[k] -= 2;
            if k > 0 && self.pos[k - 1] == self.pos[k] {
                self.size[k - 1] += self.size.remove(k);
                self.pos.remove(k);
            }
        }
    }

    fn to_state(&self, template: &LatticeState, time: f64) -> LatticeState {
        let mut ends = Vec::with_capacity(self.size.len());
        let mut acc = 0;
        for &s in &self.size {
            acc += s;
            ends.push(acc);
        }
        let partition = IntervalPartition::from_block_ends(ends).expect("sizes are positive");
        let mut positions = vec![0; template.len()];
        kpi_inv_half(&self.pos, &partition, &mut positions);
        LatticeState {
            positions,
            lattice: template.lattice,
            partition,
            time,
        }
    }
}

fn run<F: FnMut(&Blocks, f64)>(
    initial: &LatticeState,
    p: f64,
    t: f64,
    rng: &mut RngStream,
    mut on_event: F,
) -> Result<Blocks> {
    check_range("p", p, 0.0, 1.0)?;
    check_nonneg("t", t)?;
    let mut blocks = Blocks::of(initial);
    let mut now = 0.0;
    loop {
        let rate = blocks.pos.len() as f64;
        if rate == 0.0 {
            break;
        }
        now += -rng.uniform_open0().ln() / rate;
        if now > t {
            break;
        }
        let k = rng.index(blocks.pos.len());
        let right = rng.uniform() < p;
        blocks.jump(k, right);
        on_event(&blocks, now);
    }
    Ok(blocks)
}

/// Exact event-driven simulation up to time `t`: each free block jumps at rate 1,
/// right with probability `p`, and merges with any block it lands on.
pub fn simulate_cw(initial: &LatticeState, p: f64, t: f64, rng: &mut RngStream) -> Result<LatticeState> {
    let blocks = run(initial, p, t, rng, |_, _| {})?;
    Ok(blocks.to_state(initial, initial.time + t))
}

/// Like [`simulate_cw`] but returns the state after every jump, starting with `initial`.
pub fn simulate_cw_trace(
    initial: &LatticeState,
    p: f64,
    t: f64,
    rng: &mut RngStream,
) -> Result<Vec<LatticeState>> {
    let mut trace = vec![initial.clone()];
    run(initial, p, t, rng, |b, now| trace.push(b.to_state(initial, initial.time + now)))?;
    Ok(trace)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::latticecoal::{kpi_map, Lattice};
    use crate::stats::McEstimate;
    use proptest::prelude::*;

    /// `e^{-t} I_k(t)`: law of a rate-1 symmetric walk at time `t`, by the Bessel series.
    pub(crate) fn bessel_walk_pmf(k: i64, t: f64) -> f64 {
        let k = k.unsigned_abs() as i32;
        let mut term = (0.5 * t).powi(k) / (1..=k).map(f64::from).product::<f64>();
        let mut sum = 0.0;
        for j in 0..200 {
            if j > 0 {
                term *= (0.5 * t).powi(2) / (j as f64 * (j + k) as f64);
            }
            sum += term;
        }
        (-t).exp() * sum
    }

    #[test]
    fn zero_time_is_identity() {
        let s = LatticeState::new(&[0.0, 1.0, 1.0, 4.0], Lattice::Integer).unwrap();
        let mut rng = RngStream::new(0, 0);
        let out = simulate_cw(&s, 0.3, 0.0, &mut rng).unwrap();
        assert_eq!(out.positions(), s.positions());
        assert_eq!(out.partition(), s.partition());
        assert!(simulate_cw(&s, 1.5, 1.0, &mut rng).is_err());
    }

    #[test]
    fn single_walker_matches_bessel_series() {
        let p0 = bessel_walk_pmf(0, 1.0);
        assert!((p0 - 0.465_759_607_593_640_4).abs() < 1e-14);
        let s = LatticeState::new(&[0.0], Lattice::Integer).unwrap();
        let n = 1_000_000u64;
        let xs: Vec<f64> = (0..n)
            .map(|k| {
                let mut rng = RngStream::new(3, k);
                let out = simulate_cw(&s, 0.5, 1.0, &mut rng).unwrap();
                f64::from(u8::from(out.positions()[0] == 0.0))
            })
            .collect();
        let e = McEstimate::from_samples(&xs, 3, "");
        assert!((e.mean - p0).abs() < 3.0 * e.std_error, "{e:?} vs {p0}");
    }

    #[test]
    fn coalesced_pair_moves_as_one() {
        let s = LatticeState::new(&[0.0, 0.0], Lattice::Integer).unwrap();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..100 {
            let out = simulate_cw(&s, 0.5, 2.0, &mut rng).unwrap();
            assert_eq!(out.partition().len(), 1);
            let x = out.positions();
            assert_eq!(x[0], x[1]);
        }
    }

    #[test]
    fn half_integer_walk_stays_on_lattice() {
        let s = LatticeState::new(&[-0.5, 1.5], Lattice::HalfInteger).unwrap();
        let mut rng = RngStream::new(6, 0);
        let out = simulate_cw(&s, 0.3, 3.0, &mut rng).unwrap();
        assert_eq!(out.lattice(), Lattice::HalfInteger);
        assert!(out.half_units().iter().all(|h| h.rem_euclid(2) == 1));
    }

    proptest! {
        #[test]
        fn paths_preserve_order_and_only_coarsen(
            mut xs in proptest::collection::vec(-4i32..4, 1..6),
            p in 0.0f64..=1.0,
            seed in 0u64..1000,
        ) {
            xs.sort();
            let pos: Vec<f64> = xs.iter().map(|&x| f64::from(x)).collect();
            let s = LatticeState::new(&pos, Lattice::Integer).unwrap();
            let mut rng = RngStream::new(seed, 0);
            let trace = simulate_cw_trace(&s, p, 5.0, &mut rng).unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1].partition().is_coarsening_of(w[0].partition()));
                prop_assert!(w[1].time >= w[0].time);
            }
            for st in &trace {
                let x = st.positions();
                prop_assert!(x.windows(2).all(|w| w[0] <= w[1]));
                // equal iff same block
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        prop_assert_eq!(x[i] == x[j], st.partition().same_block(i, j));
                    }
                }
                prop_assert_eq!(kpi_map(st).len(), st.partition().len());
            }
        }
    }
}
