//! Monte Carlo estimates and the hypothesis tests used to compare them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::randkit::RngStream;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Mean and standard error of a batch of replicate values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicates: u64,
    pub seed: u64,
    pub label: String,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], seed: u64, label: &str) -> Self {
        let n = samples.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            compensated_sum(samples.iter().copied()) / n as f64
        };
        let std_error = if n < 2 {
            0.0
        } else {
            let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt()
        };
        Self {
            mean,
            std_error,
            replicates: n as u64,
            seed,
            label: label.to_string(),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            replicates: 0,
            seed: 0,
            label: "reference".into(),
        }
    }
}

/// Runs `f` once per replicate on its own stream and returns results in replicate order.
/// Output is independent of the rayon pool size.
pub fn replicate_map<T, F>(seed: u64, label: &str, replicates: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync + Send,
{
    (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::for_replicate(seed, label, k);
            f(&mut rng)
        })
        .collect()
}

/// Monte Carlo mean of a scalar functional.
pub fn mc_mean<F>(seed: u64, label: &str, replicates: u64, f: F) -> McEstimate
where
    F: Fn(&mut RngStream) -> f64 + Sync + Send,
{
    let xs = replicate_map(seed, label, replicates, f);
    McEstimate::from_samples(&xs, seed, label)
}

/// z-score `(a - b) / sqrt(se_a^2 + se_b^2)`; pass `McEstimate::constant` for a fixed reference.
pub fn two_sample_z(a: &McEstimate, b: &McEstimate) -> Result<f64> {
    let se = (a.std_error * a.std_error + b.std_error * b.std_error).sqrt();
    let diff = a.mean - b.mean;
    if se == 0.0 {
        if diff == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::InsufficientData(format!(
            "zero combined standard error with unequal means ({} vs {})",
            a.mean, b.mean
        )));
    }
    Ok(diff / se)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

const MIN_EXPECTED: f64 = 5.0;

fn chi2_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0)
}

/// Groups cell indices so that every group has `weight >= MIN_EXPECTED`.
/// Small cells are pooled together; a pool that stays small joins the smallest large cell.
fn pool_cells(weights: &[f64]) -> Vec<Vec<usize>> {
    let (small, large): (Vec<usize>, Vec<usize>) =
        (0..weights.len()).partition(|&i| weights[i] < MIN_EXPECTED);
    let mut groups: Vec<Vec<usize>> = large.iter().map(|&i| vec![i]).collect();
    if !small.is_empty() {
        let pooled: f64 = small.iter().map(|&i| weights[i]).sum();
        if pooled >= MIN_EXPECTED || groups.is_empty() {
            groups.push(small);
        } else {
            let target = (0..groups.len())
                .min_by(|&a, &b| weights[groups[a][0]].total_cmp(&weights[groups[b][0]]))
                .expect("non-empty");
            groups[target].extend(small);
        }
    }
    groups
}

/// Pearson goodness of fit of `observed` counts against cell probabilities `expected`.
/// Cells whose expected count is below 5 are pooled.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() {
        return Err(invalid("expected", "length differs from observed"));
    }
    if observed.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 cells".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let psum: f64 = expected.iter().sum();
    if expected.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || psum <= 0.0 {
        return Err(invalid("expected", "probabilities must be finite, nonnegative, not all zero"));
    }
    let exp_counts: Vec<f64> = expected.iter().map(|p| p / psum * total as f64).collect();
    let groups = pool_cells(&exp_counts);
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 cells with expected count >= 5 after pooling".into(),
        ));
    }
    let mut stat = 0.0;
    for g in &groups {
        let o: f64 = g.iter().map(|&i| observed[i] as f64).sum();
        let e: f64 = g.iter().map(|&i| exp_counts[i]).sum();
        stat += (o - e) * (o - e) / e;
    }
    let dof = groups.len() - 1;
    Ok(ChiSquareResult {
        statistic: stat,
        dof,
        p_value: chi2_sf(stat, dof),
    })
}

/// Two-sample (2 x k contingency) chi-square homogeneity test.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareResult> {
    if a.len() != b.len() {
        return Err(invalid("b", "length differs from a"));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 cells".into()));
    }
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InsufficientData("both samples need observations".into()));
    }
    let n = na + nb;
    // Pool on the smaller of the two expected counts per column.
    let col: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) as f64).collect();
    let min_exp: Vec<f64> = col.iter().map(|c| c * na.min(nb) / n).collect();
    let groups = pool_cells(&min_exp);
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 cells with expected count >= 5 after pooling".into(),
        ));
    }
    let mut stat = 0.0;
    for g in &groups {
        let oa: f64 = g.iter().map(|&i| a[i] as f64).sum();
        let ob: f64 = g.iter().map(|&i| b[i] as f64).sum();
        let c = oa + ob;
        let ea = c * na / n;
        let eb = c * nb / n;
        stat += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = groups.len() - 1;
    Ok(ChiSquareResult {
        statistic: stat,
        dof,
        p_value: chi2_sf(stat, dof),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// Largest `ks_statistic` accepted at `alpha`, from the same asymptotic law.
pub fn ks_critical(alpha: f64, n_eff: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ks_p_value(mid, n_eff) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One-sample Kolmogorov-Smirnov test against a continuous reference CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "KS test needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 10 || b.len() < 10 {
        return Err(Error::InsufficientData(
            "KS test needs at least 10 samples per side".into(),
        ));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = xs[i].min(ys[j]);
        while i < na && xs[i] <= v {
            i += 1;
        }
        while j < nb && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::Normal;

    fn est(mean: f64, se: f64) -> McEstimate {
        McEstimate {
            mean,
            std_error: se,
            replicates: 100,
            seed: 0,
            label: String::new(),
        }
    }

    #[test]
    fn z_scores() {
        assert_eq!(two_sample_z(&est(0.5, 0.01), &est(0.5, 0.02)).unwrap(), 0.0);
        let z = two_sample_z(&est(0.5, 0.01), &McEstimate::constant(0.53)).unwrap();
        assert!((z + 3.0).abs() < 1e-12, "{z}");
        assert_eq!(two_sample_z(&est(0.5, 0.003), &est(0.5, 0.004)).unwrap(), 0.0);
        assert!(two_sample_z(&est(0.5, 0.0), &McEstimate::constant(0.6)).is_err());
        assert_eq!(two_sample_z(&est(0.5, 0.0), &McEstimate::constant(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn chi_square_hand_example() {
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert_eq!(r.dof, 1);
        assert!((r.p_value - 0.0455).abs() < 1e-3);
    }

    #[test]
    fn chi_square_identical_samples() {
        let r = chi_square_two_sample(&[100, 200, 300], &[100, 200, 300]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.999);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn chi_square_pools_small_cells() {
        // expected counts 49, 49, 1, 1: the two small cells become one pooled cell of 2,
        // which is still small and joins a large cell.
        let r = chi_square_gof(&[50, 48, 1, 1], &[0.49, 0.49, 0.01, 0.01]).unwrap();
        assert_eq!(r.dof, 1);
        let r = chi_square_gof(&[50, 40, 5, 5], &[0.45, 0.45, 0.05, 0.05]).unwrap();
        assert_eq!(r.dof, 3);
        assert!(chi_square_gof(&[1, 1], &[0.5, 0.5]).is_err());
        assert!(chi_square_gof(&[1], &[1.0]).is_err());
    }

    #[test]
    fn ks_self_and_null_and_power() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&xs, &xs).unwrap().statistic, 0.0);
        assert!(ks_test(&xs[..5], |x| x).is_err());

        let mut s = RngStream::new(11, 0);
        let us: Vec<f64> = (0..100_000).map(|_| s.uniform()).collect();
        let r = ks_test(&us, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");

        let n = Normal::new(0.0, 1.0).unwrap();
        let shifted: Vec<f64> = (0..10_000).map(|_| s.std_normal() + 0.2).collect();
        let r = ks_test(&shifted, |x| n.cdf(x)).unwrap();
        assert!(r.p_value < 1e-6, "{r:?}");
    }

    #[test]
    fn ks_critical_value_matches_table() {
        // 1.9495 / sqrt(n) is the asymptotic 0.001 critical value.
        let c = ks_critical(0.001, 1e6);
        assert!((c * 1000.0 - 1.9495).abs() < 2e-3, "{c}");
    }

    #[test]
    fn replicate_map_is_ordered_and_reproducible() {
        let a = replicate_map(5, "x", 100, |r| r.uniform());
        let b = replicate_map(5, "x", 100, |r| r.uniform());
        assert_eq!(a, b);
        let c = replicate_map(5, "y", 100, |r| r.uniform());
        assert_ne!(a, c);
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0], 0, "");
        assert_eq!(e.mean, 2.0);
        assert!((e.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}
