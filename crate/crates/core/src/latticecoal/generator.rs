use crate::error::{check_range, invalid, Result};
use crate::partition::IntervalPartition;

use super::{array_code, kpi_inv_half, to_f64, Lattice, LatticeState};

/// `p sum f(K^-1(x_pi + e_i)) + (1-p) sum f(K^-1(x_pi - e_i)) - l(pi) f(x)` in half-units.
fn generator_half<F: FnMut(&[i64]) -> f64>(
    free: &[i64],
    partition: &IntervalPartition,
    right_prob: f64,
    mut f: F,
) -> f64 {
    let mut shifted = free.to_vec();
    let mut full = vec![0i64; partition.size()];
    kpi_inv_half(free, partition, &mut full);
    let centre = f(&full);
    let mut up = 0.0;
    let mut down = 0.0;
    for i in 0..free.len() {
        shifted[i] = free[i] + 2;
        kpi_inv_half(&shifted, partition, &mut full);
        up += f(&full);
        shifted[i] = free[i] - 2;
        kpi_inv_half(&shifted, partition, &mut full);
        down += f(&full);
        shifted[i] = free[i];
    }
    right_prob * up + (1.0 - right_prob) * down - free.len() as f64 * centre
}

/// Generator of the coalescing walk with right-jump probability `right_prob`, applied to
/// `f` (a function of real coordinates) at `state`. Works on either lattice.
pub fn apply_generator(f: &dyn Fn(&[f64]) -> f64, state: &LatticeState, right_prob: f64) -> Result<f64> {
    check_range("p", right_prob, 0.0, 1.0)?;
    let mut buf = vec![0.0; state.len()];
    Ok(generator_half(
        &state.free_half_units(),
        state.partition(),
        right_prob,
        |h| {
            for (b, &v) in buf.iter_mut().zip(h) {
                *b = to_f64(v);
            }
            f(&buf)
        },
    ))
}

/// `G f(x)` for the p-simple walk on the integers.
pub fn apply_generator_g(f: &dyn Fn(&[f64]) -> f64, state: &LatticeState, p: f64) -> Result<f64> {
    if state.lattice() != Lattice::Integer {
        return Err(invalid("state", "G acts on integer-lattice states"));
    }
    apply_generator(f, state, p)
}

/// `g-bar(x; y) = g(array of 1{x_i in ]y_j, y_{j+1}]})` with `g` given on array codes.
pub fn gbar(g: &dyn Fn(usize) -> f64, x: &LatticeState, y: &LatticeState) -> f64 {
    g(array_code(x.half_units(), y.half_units()))
}

/// `|G(g-bar_y)(x) - H(g-bar_x)(y)|`, where `H` generates the `(1-p)`-simple walk on the
/// half-integers. The balls-in-boxes duality says this vanishes identically.
pub fn check_generator_duality(
    x: &LatticeState,
    y: &LatticeState,
    p: f64,
    g: &dyn Fn(usize) -> f64,
) -> Result<f64> {
    check_range("p", p, 0.0, 1.0)?;
    if x.lattice() != Lattice::Integer || y.lattice() != Lattice::HalfInteger {
        return Err(invalid("x/y", "x must be on the integers and y on the half-integers"));
    }
    let yh = y.half_units();
    let xh = x.half_units();
    let lhs = generator_half(&x.free_half_units(), x.partition(), p, |xs| g(array_code(xs, yh)));
    let rhs = generator_half(&y.free_half_units(), y.partition(), 1.0 - p, |ys| g(array_code(xh, ys)));
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::RngStream;

    fn nondecreasing_tuples(len: usize, lo: i64, hi: i64, step: i64) -> Vec<Vec<i64>> {
        if len == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for rest in nondecreasing_tuples(len - 1, lo, hi, step) {
            let start = rest.last().copied().unwrap_or(lo);
            let mut v = start;
            while v <= hi {
                let mut t = rest.clone();
                t.push(v);
                out.push(t);
                v += step;
            }
        }
        out
    }

    #[test]
    fn generator_examples() {
        let s = LatticeState::new(&[0.0, 2.0], Lattice::Integer).unwrap();
        assert_eq!(apply_generator_g(&|_| 3.5, &s, 0.3).unwrap(), 0.0);

        let one = LatticeState::new(&[5.0], Lattice::Integer).unwrap();
        for &p in &[0.0, 0.2, 0.5, 0.9] {
            let v = apply_generator_g(&|x| x[0], &one, p).unwrap();
            assert!((v - (2.0 * p - 1.0)).abs() < 1e-14);
        }

        let pair = LatticeState::new(&[0.0, 0.0], Lattice::Integer).unwrap();
        let v = apply_generator_g(&|x| x[0] * x[1], &pair, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-14);

        let half = LatticeState::new(&[0.5], Lattice::HalfInteger).unwrap();
        assert!(apply_generator_g(&|x| x[0], &half, 0.5).is_err());
    }

    #[test]
    fn duality_single_bit() {
        let x = LatticeState::new(&[0.0], Lattice::Integer).unwrap();
        let y = LatticeState::new(&[-0.5, 0.5], Lattice::HalfInteger).unwrap();
        let d = check_generator_duality(&x, &y, 0.7, &|code| code as f64).unwrap();
        assert!(d < 1e-15);
        let d = check_generator_duality(&x, &y, 0.7, &|_| 2.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn duality_exhaustive_small() {
        let mut rng = RngStream::new(99, 0);
        let mut worst: f64 = 0.0;
        for m in 1..=2 {
            for n in 1..=3 {
                let bits = m * (n - 1);
                for xs in nondecreasing_tuples(m, -4, 4, 2) {
                    for ys in nondecreasing_tuples(n, -3, 3, 2) {
                        let x = LatticeState::from_half_units(xs.clone(), Lattice::Integer).unwrap();
                        let y = LatticeState::from_half_units(ys.clone(), Lattice::HalfInteger).unwrap();
                        let table: Vec<f64> = (0..1usize << bits).map(|_| rng.uniform()).collect();
                        for &p in &[0.3, 0.5, 0.9] {
                            let d = check_generator_duality(&x, &y, p, &|c| table[c]).unwrap();
                            worst = worst.max(d);
                        }
                    }
                }
            }
        }
        assert!(worst <= 1e-12, "{worst}");
    }
}
