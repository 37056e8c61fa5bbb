use super::pair::pair_step;
use super::{BmState, FreeBlocks};
use crate::error::{check_positive, Result};
use crate::randkit::RngStream;

/// Coalescing Brownian motions run to time `t` with a bridge-corrected Euler scheme.
///
/// Each step moves every free block by an exact Gaussian increment. Neighbours are then
/// scanned left to right against the current leading block: a neighbour whose end
/// position is not strictly above the leader merges outright, otherwise it merges with
/// the Brownian bridge crossing probability `exp(-d0 d1 / step)` of a gap with variance
/// rate 2. A merged block follows the leader's path.
pub fn coalescing_bm(initial: &BmState, t: f64, step: f64, rng: &mut RngStream) -> Result<BmState> {
    check_positive("t", t)?;
    check_positive("step", step)?;
    let mut blocks = initial.to_blocks();
    euler_run(&mut blocks, t, step, rng);
    Ok(BmState::from_blocks(&blocks, initial.time + t))
}

/// Advances free blocks by `t`, using exact samplers when at most two blocks remain
/// and the Euler scheme with the given step otherwise.
pub fn advance_blocks(blocks: &mut FreeBlocks, t: f64, step: f64, rng: &mut RngStream) -> Result<()> {
    check_positive("t", t)?;
    check_positive("step", step)?;
    advance_unchecked(blocks, t, step, rng);
    Ok(())
}

pub(crate) fn advance_unchecked(blocks: &mut FreeBlocks, t: f64, step: f64, rng: &mut RngStream) {
    match blocks.len() {
        0 => {}
        1 => blocks.pos[0] += t.sqrt() * rng.std_normal(),
        2 => {
            let s = pair_step(blocks.pos[0], blocks.pos[1], t, rng);
            if s.coalesced {
                blocks.pos.truncate(1);
                blocks.pos[0] = s.y1;
                blocks.size[0] += blocks.size.pop().expect("two blocks");
            } else {
                blocks.pos[0] = s.y1;
                blocks.pos[1] = s.y2;
            }
        }
        _ => euler_run(blocks, t, step, rng),
    }
}

/// Source of Gaussian increments and crossing uniforms for one Euler step.
pub(crate) trait StepNoise {
    /// Increment over `dt` for the block whose lowest original particle is `leader`.
    fn increment(&mut self, leader: usize, dt: f64) -> f64;
    fn uniform(&mut self) -> f64;
    fn end_step(&mut self) {}
}

impl StepNoise for RngStream {
    #[inline]
    fn increment(&mut self, _leader: usize, dt: f64) -> f64 {
        dt.sqrt() * self.std_normal()
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        RngStream::uniform(self)
    }
}

fn euler_run(blocks: &mut FreeBlocks, t: f64, step: f64, rng: &mut RngStream) {
    let mut remaining = t;
    let mut start = Vec::with_capacity(blocks.len());
    // Tolerate round-off so t = k * step takes exactly k steps.
    while remaining > step * 1e-9 {
        if blocks.len() == 1 {
            blocks.pos[0] += remaining.sqrt() * rng.std_normal();
            return;
        }
        let dt = remaining.min(step);
        remaining -= dt;
        euler_step(blocks, &mut start, dt, rng);
    }
}

pub(crate) fn euler_step<N: StepNoise>(blocks: &mut FreeBlocks, start: &mut Vec<f64>, dt: f64, noise: &mut N) {
    start.clear();
    start.extend_from_slice(&blocks.pos);
    let mut leader = 0;
    for (p, &s) in blocks.pos.iter_mut().zip(&blocks.size) {
        *p += noise.increment(leader, dt);
        leader += s;
    }
    let mut w = 0;
    for j in 1..blocks.len() {
        let d0 = start[j] - start[w];
        let d1 = blocks.pos[j] - blocks.pos[w];
        let merge = d1 <= 0.0 || noise.uniform() < (-d0 * d1 / dt).exp();
        if merge {
            blocks.size[w] += blocks.size[j];
        } else {
            w += 1;
            start[w] = start[j];
            blocks.pos[w] = blocks.pos[j];
            blocks.size[w] = blocks.size[j];
        }
    }
    blocks.pos.truncate(w + 1);
    blocks.size.truncate(w + 1);
    noise.end_step();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contcoal::coalescing_pair_exact;
    use crate::partition::IntervalPartition;
    use crate::stats::{chi_square_two_sample, ks_test, two_sample_z, McEstimate};
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn single_particle_is_brownian() {
        let init = BmState::new(&[0.7]).unwrap();
        let mut rng = RngStream::new(10, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| coalescing_bm(&init, 2.0, 0.1, &mut rng).unwrap().positions()[0])
            .collect();
        let n = Normal::new(0.7, 2.0f64.sqrt()).unwrap();
        assert!(ks_test(&xs, |x| n.cdf(x)).unwrap().p_value > 0.001);
        assert!(coalescing_bm(&init, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn two_particles_match_exact_pair() {
        let init = BmState::new(&[0.0, 1.0]).unwrap();
        let n = 20_000;
        let mut rng = RngStream::new(11, 0);
        let euler: Vec<f64> = (0..n)
            .map(|_| f64::from(u8::from(coalescing_bm(&init, 1.0, 1e-3, &mut rng).unwrap().all_coalesced())))
            .collect();
        let mut rng = RngStream::new(11, 1);
        let exact: Vec<f64> = (0..n)
            .map(|_| f64::from(u8::from(coalescing_pair_exact(0.0, 1.0, 1.0, &mut rng).unwrap().coalesced)))
            .collect();
        let a = McEstimate::from_samples(&euler, 11, "euler");
        let b = McEstimate::from_samples(&exact, 11, "exact");
        assert!(two_sample_z(&a, &b).unwrap().abs() < 3.0, "{a:?} {b:?}");
    }

    /// Replays fixed fine-grid Brownian increments, summing `per_step` of them per step.
    struct PathNoise<'a> {
        fine: &'a [Vec<f64>],
        per_step: usize,
        cursor: usize,
        rng: RngStream,
    }

    impl StepNoise for PathNoise<'_> {
        fn increment(&mut self, leader: usize, _dt: f64) -> f64 {
            self.fine[leader][self.cursor..self.cursor + self.per_step].iter().sum()
        }

        fn uniform(&mut self) -> f64 {
            self.rng.uniform()
        }

        fn end_step(&mut self) {
            self.cursor += self.per_step;
        }
    }

    #[test]
    fn step_halving_self_convergence() {
        // Each coarse run reuses the Brownian paths of its half-step partner, so the
        // estimated difference carries little noise beyond the discretization bias.
        let x0 = [0.0, 0.5, 1.0];
        let coupled_diff = |step: f64| {
            let steps = (1.0 / step).round() as usize;
            let fine_dt = step / 2.0;
            let n = 20_000u64;
            let mut acc = 0i64;
            for r in 0..n {
                let mut rng = RngStream::for_replicate(12, "halving", r);
                let fine: Vec<Vec<f64>> = (0..3)
                    .map(|_| (0..2 * steps).map(|_| fine_dt.sqrt() * rng.std_normal()).collect())
                    .collect();
                let mut outcome = [false; 2];
                for (o, per_step) in outcome.iter_mut().zip([2, 1]) {
                    let mut noise = PathNoise { fine: &fine, per_step, cursor: 0, rng: RngStream::new(r, per_step as u64) };
                    let mut blocks = FreeBlocks::from_sorted(&x0);
                    let mut start = Vec::new();
                    let dt = step * per_step as f64 / 2.0;
                    for _ in 0..2 * steps / per_step {
                        euler_step(&mut blocks, &mut start, dt, &mut noise);
                    }
                    *o = blocks.len() == 1;
                }
                acc += i64::from(outcome[0]) - i64::from(outcome[1]);
            }
            (acc as f64 / n as f64).abs()
        };
        let diffs: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&h| coupled_diff(h)).collect();
        assert!(diffs[0] > diffs[1] && diffs[1] > diffs[2], "{diffs:?}");
    }

    #[test]
    fn marginals_survive_coalescence() {
        let xs0 = [-0.5, 0.0, 0.0, 0.4];
        let init = BmState::new(&xs0).unwrap();
        let mut rng = RngStream::new(13, 0);
        let mut cols = vec![Vec::new(); 4];
        for _ in 0..50_000 {
            let s = coalescing_bm(&init, 1.0, 1e-2, &mut rng).unwrap();
            for (c, &x) in cols.iter_mut().zip(s.positions()) {
                c.push(x);
            }
        }
        for (c, &x0) in cols.iter().zip(&xs0) {
            let n = Normal::new(x0, 1.0).unwrap();
            assert!(ks_test(c, |x| n.cdf(x)).unwrap().p_value > 0.001);
        }
    }

    #[test]
    fn duality_single_ball_two_boxes() {
        let (x, y1, y2, t): (f64, f64, f64, f64) = (0.2, -0.3, 0.9, 1.0);
        let phi = |z: f64| Normal::new(0.0, 1.0).unwrap().cdf(z);
        let exact = phi((y2 - x) / t.sqrt()) - phi((y1 - x) / t.sqrt());
        let mut rng = RngStream::new(14, 0);
        let hits: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let s = coalescing_pair_exact(y1, y2, t, &mut rng).unwrap();
                f64::from(u8::from(s.y1 < x && x <= s.y2))
            })
            .collect();
        let e = McEstimate::from_samples(&hits, 14, "");
        assert!((e.mean - exact).abs() < 3.0 * e.std_error, "{e:?} vs {exact}");
    }

    #[test]
    fn duality_two_balls_two_boxes() {
        // Ball i lies in box ]y1, y2] or not; the code is bit0 + 2 bit1.
        let (x, y, t) = ([-0.2, 0.3], [-0.4, 0.5], 1.0);
        let n = 40_000;
        let init = BmState::new(&x).unwrap();
        let mut fwd = [0u64; 4];
        let mut bwd = [0u64; 4];
        let mut rng = RngStream::new(15, 0);
        for _ in 0..n {
            let s = coalescing_bm(&init, t, 1e-3, &mut rng).unwrap();
            let code = s.positions().iter().enumerate().fold(0, |c, (i, &xi)| {
                c | (usize::from(y[0] < xi && xi <= y[1]) << i)
            });
            fwd[code] += 1;
        }
        let mut rng = RngStream::new(15, 1);
        for _ in 0..n {
            let s = coalescing_pair_exact(y[0], y[1], t, &mut rng).unwrap();
            let code = x.iter().enumerate().fold(0, |c, (i, &xi)| c | (usize::from(s.y1 < xi && xi <= s.y2) << i));
            bwd[code] += 1;
        }
        let r = chi_square_two_sample(&fwd, &bwd).unwrap();
        assert!(r.p_value > 0.001, "{r:?} {fwd:?} {bwd:?}");
    }

    proptest! {
        #[test]
        fn order_and_partition_coarsening(mut xs in proptest::collection::vec(-2.0f64..2.0, 1..8), seed in 0u64..1000) {
            xs.sort_by(f64::total_cmp);
            let init = BmState::new(&xs).unwrap();
            let mut rng = RngStream::new(seed, 0);
            let s = coalescing_bm(&init, 0.5, 0.05, &mut rng).unwrap();
            prop_assert!(s.positions().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(s.partition().is_coarsening_of(init.partition()));
            prop_assert_eq!(s.partition(), &IntervalPartition::from_sorted(s.positions()));
        }
    }
}
