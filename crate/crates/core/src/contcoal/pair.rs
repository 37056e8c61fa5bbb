use crate::error::{check_positive, invalid, Result};
use crate::randkit::RngStream;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSample {
    pub y1: f64,
    pub y2: f64,
    pub coalesced: bool,
}

/// Exact time-`t` sample of two coalescing Brownian motions started at `a <= b`.
///
/// In coordinates rotated by 45 degrees the scaled gap `(Y2 - Y1)/sqrt 2` is a Brownian
/// motion from `(b - a)/sqrt 2` absorbed at 0, independent of the scaled sum until the
/// meeting time. Survival and the surviving gap come from the reflection principle
/// (a free endpoint, killed with the bridge crossing probability). After a meeting at
/// time `tau` the pair moves as one standard Brownian motion, so the common position is
/// the midpoint at `tau` plus an independent `N(0, t - tau)` increment.
pub fn coalescing_pair_exact(a: f64, b: f64, t: f64, rng: &mut RngStream) -> Result<PairSample> {
    check_positive("t", t)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("a/b", "must be finite"));
    }
    if b < a {
        return Err(invalid("b", format!("must be >= a, got a = {a}, b = {b}")));
    }
    Ok(pair_step(a, b, t, rng))
}

#[inline]
pub(crate) fn pair_step(a: f64, b: f64, t: f64, rng: &mut RngStream) -> PairSample {
    let gap0 = (b - a) / SQRT2;
    let sd = t.sqrt();
    if gap0 > 0.0 {
        let gap_t = gap0 + sd * rng.std_normal();
        let survived = gap_t > 0.0 && rng.uniform() >= (-2.0 * gap0 * gap_t / t).exp();
        if survived {
            let sum_t = (a + b) / SQRT2 + sd * rng.std_normal();
            return PairSample {
                y1: (sum_t - gap_t) / SQRT2,
                y2: (sum_t + gap_t) / SQRT2,
                coalesced: false,
            };
        }
    }
    // Meeting time given that it is at most t; tau = gap0^2 / Z^2 for Z standard normal.
    let tau = if gap0 > 0.0 {
        loop {
            let z = rng.std_normal();
            let tau = gap0 * gap0 / (z * z);
            if tau <= t {
                break tau;
            }
        }
    } else {
        0.0
    };
    let meet = 0.5 * (a + b) + (0.5 * tau).sqrt() * rng.std_normal();
    let y = meet + (t - tau).sqrt() * rng.std_normal();
    PairSample { y1: y, y2: y, coalesced: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_test, McEstimate};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn equal_start_coalesces_immediately() {
        let mut rng = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let s = coalescing_pair_exact(0.3, 0.3, 2.0, &mut rng).unwrap();
                assert!(s.coalesced && s.y1 == s.y2);
                s.y1
            })
            .collect();
        let n = Normal::new(0.3, 2.0f64.sqrt()).unwrap();
        assert!(ks_test(&xs, |x| n.cdf(x)).unwrap().p_value > 0.001);
        assert!(coalescing_pair_exact(1.0, 0.0, 1.0, &mut rng).is_err());
        assert!(coalescing_pair_exact(0.0, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn coalescence_probability_reflection_principle() {
        let exact = crate::special::erfc(0.5);
        assert!((exact - 0.479_500_122_186_953_5).abs() < 1e-15, "{exact}");
        let mut rng = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| f64::from(u8::from(coalescing_pair_exact(0.0, 1.0, 1.0, &mut rng).unwrap().coalesced)))
            .collect();
        let e = McEstimate::from_samples(&xs, 0, "");
        assert!((e.mean - exact).abs() < 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn marginals_are_brownian() {
        let mut rng = RngStream::new(3, 0);
        let (y1, y2): (Vec<f64>, Vec<f64>) = (0..100_000)
            .map(|_| {
                let s = coalescing_pair_exact(-0.2, 0.5, 1.0, &mut rng).unwrap();
                assert!(s.y1 <= s.y2);
                (s.y1, s.y2)
            })
            .unzip();
        let n1 = Normal::new(-0.2, 1.0).unwrap();
        let n2 = Normal::new(0.5, 1.0).unwrap();
        assert!(ks_test(&y1, |x| n1.cdf(x)).unwrap().p_value > 0.001);
        assert!(ks_test(&y2, |x| n2.cdf(x)).unwrap().p_value > 0.001);
    }
}
