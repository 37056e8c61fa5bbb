use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::randkit::RngStream;

/// Finite initial measure on the line: point masses or piecewise-uniform mass.
///
/// In JSON: `{"atoms": [[loc, mass], ...]}` or
/// `{"piecewise": {"breaks": [b0, ..., bk], "weights": [w1, ..., wk]}}`, where `wi` is the
/// mass spread uniformly over `]b(i-1), bi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct InitialMeasure {
    kind: Kind,
    /// Cumulative mass: after atom `i`, or at `breaks[i]`.
    cum: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Atoms { locs: Vec<f64>, masses: Vec<f64> },
    Piecewise { breaks: Vec<f64>, weights: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum RawMeasure {
    Atoms(Vec<(f64, f64)>),
    Piecewise { breaks: Vec<f64>, weights: Vec<f64> },
}

impl TryFrom<RawMeasure> for InitialMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        match raw {
            RawMeasure::Atoms(a) => Self::atoms(&a),
            RawMeasure::Piecewise { breaks, weights } => Self::piecewise(breaks, weights),
        }
    }
}

impl From<InitialMeasure> for RawMeasure {
    fn from(m: InitialMeasure) -> Self {
        match m.kind {
            Kind::Atoms { locs, masses } => RawMeasure::Atoms(locs.into_iter().zip(masses).collect()),
            Kind::Piecewise { breaks, weights } => RawMeasure::Piecewise { breaks, weights },
        }
    }
}

fn check_mass(name: &str, w: f64) -> Result<()> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(invalid(name, format!("masses must be finite and >= 0, got {w}")));
    }
    Ok(())
}

fn cumulative(ws: &[f64]) -> Vec<f64> {
    let mut s = crate::stats::CompensatedSum::default();
    ws.iter()
        .map(|&w| {
            s.add(w);
            s.value()
        })
        .collect()
}

impl InitialMeasure {
    pub fn zero() -> Self {
        Self { kind: Kind::Atoms { locs: vec![], masses: vec![] }, cum: vec![] }
    }

    /// Point masses; atoms are sorted, merged by location and zero masses dropped.
    pub fn atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut a = Vec::with_capacity(atoms.len());
        for &(x, w) in atoms {
            if !x.is_finite() {
                return Err(invalid("atoms", format!("locations must be finite, got {x}")));
            }
            check_mass("atoms", w)?;
            if w > 0.0 {
                a.push((x, w));
            }
        }
        a.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut locs: Vec<f64> = Vec::with_capacity(a.len());
        let mut masses: Vec<f64> = Vec::with_capacity(a.len());
        for (x, w) in a {
            if locs.last() == Some(&x) {
                *masses.last_mut().expect("non-empty") += w;
            } else {
                locs.push(x);
                masses.push(w);
            }
        }
        let cum = cumulative(&masses);
        Ok(Self { kind: Kind::Atoms { locs, masses }, cum })
    }

    pub fn dirac(x: f64, mass: f64) -> Result<Self> {
        Self::atoms(&[(x, mass)])
    }

    pub fn piecewise(breaks: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || weights.len() + 1 != breaks.len() {
            return Err(invalid("piecewise", "need k + 1 breaks for k weights, k >= 1"));
        }
        if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("piecewise.breaks", "must be finite and strictly increasing"));
        }
        for &w in &weights {
            check_mass("piecewise.weights", w)?;
        }
        let mut cum = vec![0.0];
        cum.extend(cumulative(&weights));
        Ok(Self { kind: Kind::Piecewise { breaks, weights }, cum })
    }

    /// Uniform mass `mass` on `]a, b]`.
    pub fn uniform(a: f64, b: f64, mass: f64) -> Result<Self> {
        Self::piecewise(vec![a, b], vec![mass])
    }

    pub fn total_mass(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, Kind::Atoms { .. })
    }

    /// Atom locations or piece breakpoints: the points where the CDF is not smooth.
    pub fn singular_points(&self) -> &[f64] {
        match &self.kind {
            Kind::Atoms { locs, .. } => locs,
            Kind::Piecewise { breaks, .. } => breaks,
        }
    }

    /// Atoms as `(location, mass)`; empty for a piecewise measure.
    pub fn atom_list(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            Kind::Atoms { locs, masses } => locs.iter().copied().zip(masses.iter().copied()).collect(),
            Kind::Piecewise { .. } => vec![],
        }
    }

    /// Pieces as `(left, right, mass)`; empty for an atomic measure.
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        match &self.kind {
            Kind::Atoms { .. } => vec![],
            Kind::Piecewise { breaks, weights } => {
                breaks.windows(2).zip(weights).map(|(b, &w)| (b[0], b[1], w)).collect()
            }
        }
    }

    /// Smallest and largest point of the support, if any mass exists.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Atoms { locs, .. } => Some((*locs.first()?, *locs.last()?)),
            Kind::Piecewise { breaks, weights } => {
                let first = weights.iter().position(|&w| w > 0.0)?;
                let last = weights.iter().rposition(|&w| w > 0.0)?;
                Some((breaks[first], breaks[last + 1]))
            }
        }
    }

    /// `Z0(]-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Atoms { locs, .. } => {
                let k = locs.partition_point(|&l| l <= x);
                if k == 0 { 0.0 } else { self.cum[k - 1] }
            }
            Kind::Piecewise { breaks, weights } => self.piecewise_cdf(breaks, weights, x),
        }
    }

    /// `Z0(]-inf, x[)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Atoms { locs, .. } => {
                let k = locs.partition_point(|&l| l < x);
                if k == 0 { 0.0 } else { self.cum[k - 1] }
            }
            Kind::Piecewise { breaks, weights } => self.piecewise_cdf(breaks, weights, x),
        }
    }

    fn piecewise_cdf(&self, breaks: &[f64], weights: &[f64], x: f64) -> f64 {
        if x <= breaks[0] {
            return 0.0;
        }
        let k = breaks.partition_point(|&b| b <= x);
        if k == breaks.len() {
            return self.total_mass();
        }
        let (l, r) = (breaks[k - 1], breaks[k]);
        self.cum[k - 1] + weights[k - 1] * (x - l) / (r - l)
    }

    /// `Z0(]a, b])`, zero when `b <= a`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// `Z0([a, b[)`, zero when `b <= a`.
    pub fn mass_closed_open(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf_left(b) - self.cdf_left(a)).max(0.0)
    }

    /// `int x Z0(dx)`.
    pub fn first_moment(&self) -> f64 {
        match &self.kind {
            Kind::Atoms { locs, masses } => crate::stats::compensated_sum(locs.iter().zip(masses).map(|(x, w)| x * w)),
            Kind::Piecewise { breaks, weights } => crate::stats::compensated_sum(
                breaks.windows(2).zip(weights).map(|(b, w)| 0.5 * (b[0] + b[1]) * w),
            ),
        }
    }

    /// Quantile of the normalized measure: least `x` with `cdf(x) >= u * total`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(invalid("u", format!("must lie in [0, 1], got {u}")));
        }
        if self.total_mass() <= 0.0 {
            return Err(invalid("measure", "quantile of the zero measure"));
        }
        Ok(self.quantile_unchecked(u))
    }

    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        let target = u * self.total_mass();
        match &self.kind {
            Kind::Atoms { locs, .. } => {
                let k = self.cum.partition_point(|&c| c < target).min(locs.len() - 1);
                locs[k]
            }
            Kind::Piecewise { breaks, weights } => {
                // First piece whose cumulative mass reaches the target and that carries mass.
                let mut k = self.cum[1..].partition_point(|&c| c < target).min(weights.len() - 1);
                while weights[k] == 0.0 && k + 1 < weights.len() {
                    k += 1;
                }
                let frac = ((target - self.cum[k]) / weights[k]).clamp(0.0, 1.0);
                breaks[k] + frac * (breaks[k + 1] - breaks[k])
            }
        }
    }

    /// `m` iid draws from the normalized measure, returned sorted.
    pub fn sample_sorted(&self, m: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        if self.total_mass() <= 0.0 {
            return Err(invalid("measure", "cannot sample from the zero measure"));
        }
        Ok(self.sample_sorted_unchecked(m, rng))
    }

    pub(crate) fn sample_sorted_unchecked(&self, m: usize, rng: &mut RngStream) -> Vec<f64> {
        match &self.kind {
            Kind::Atoms { locs, masses } => {
                // Multinomial counts by sequential binomials: the same law as m iid draws, sorted.
                let mut out = Vec::with_capacity(m);
                let mut left = m as u64;
                let mut rest = self.total_mass();
                for (i, (&x, &w)) in locs.iter().zip(masses).enumerate() {
                    if left == 0 {
                        break;
                    }
                    let k = if i + 1 == locs.len() || w >= rest {
                        left
                    } else {
                        rng.binomial_unchecked(left, w / rest)
                    };
                    out.extend(std::iter::repeat_n(x, k as usize));
                    left -= k;
                    rest -= w;
                }
                out
            }
            Kind::Piecewise { .. } => {
                // Sorted uniforms as normalized partial sums of exponentials, mapped monotonically.
                let mut e: Vec<f64> = Vec::with_capacity(m + 1);
                let mut s = 0.0;
                for _ in 0..=m {
                    s += -rng.uniform_open0().ln();
                    e.push(s);
                }
                let total = e[m];
                e.truncate(m);
                e.iter().map(|&v| self.quantile_unchecked(v / total)).collect()
            }
        }
    }
}

/// Finite purely atomic measure, atoms sorted by location with positive masses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    /// Normalizes: sorts, merges equal locations, prunes zero masses.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        let m = InitialMeasure::atoms(atoms)?;
        Ok(Self { atoms: m.atom_list() })
    }

    /// From locations already strictly increasing; zero masses are dropped.
    /// From nondecreasing locations; ties (possible only through rounding) are merged.
    pub(crate) fn from_sorted_unchecked(locs: &[f64], masses: &[f64]) -> Self {
        debug_assert!(locs.windows(2).all(|w| w[0] <= w[1]));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(locs.len());
        for (&x, &w) in locs.iter().zip(masses) {
            if w <= 0.0 {
                continue;
            }
            match atoms.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => atoms.push((x, w)),
            }
        }
        Self { atoms }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        crate::stats::compensated_sum(self.atoms.iter().map(|a| a.1))
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    /// Mass of `]a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let lo = self.atoms.partition_point(|p| p.0 <= a);
        let hi = self.atoms.partition_point(|p| p.0 <= b);
        self.atoms[lo..hi].iter().map(|p| p.1).sum()
    }

    /// Number of atoms in `]a, b]`.
    pub fn support_count(&self, a: f64, b: f64) -> usize {
        if b <= a {
            return 0;
        }
        self.atoms.partition_point(|p| p.0 <= b) - self.atoms.partition_point(|p| p.0 <= a)
    }

    /// `sum_j w_j Z(]y_{2j-1}, y_{2j}])`, with infinite weights counting only charged boxes.
    pub fn weighted_mass(&self, u: &IntervalUnion) -> f64 {
        u.intervals()
            .map(|(a, b, w)| {
                let z = self.mass(a, b);
                if z == 0.0 { 0.0 } else { w * z }
            })
            .sum()
    }

    pub fn to_initial(&self) -> InitialMeasure {
        InitialMeasure::atoms(&self.atoms).expect("valid atoms")
    }
}

/// Boxes `]y_{2j-1}, y_{2j}]` with nonnegative weights; weights may be `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnion")]
pub struct IntervalUnion {
    ends: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnion {
    ends: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawUnion> for IntervalUnion {
    type Error = Error;

    fn try_from(r: RawUnion) -> Result<Self> {
        Self::new(r.ends, r.weights)
    }
}

impl IntervalUnion {
    pub fn new(ends: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if ends.len() != 2 * weights.len() {
            return Err(invalid("ends", "need two endpoints per weight"));
        }
        if ends.iter().any(|y| !y.is_finite()) || ends.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("ends", "must be finite and nondecreasing"));
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(invalid("weights", "must be >= 0"));
        }
        Ok(Self { ends, weights })
    }

    pub fn single(a: f64, b: f64, weight: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![weight])
    }

    pub fn empty() -> Self {
        Self { ends: vec![], weights: vec![] }
    }

    pub fn ends(&self) -> &[f64] {
        &self.ends
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn all_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// `(left, right, weight)` per box.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.ends.chunks_exact(2).zip(&self.weights).map(|(e, &w)| (e[0], e[1], w))
    }

    /// Same boxes with new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.ends.clone(), weights)
    }

    /// Same weights on moved endpoints.
    pub(crate) fn with_ends(&self, ends: Vec<f64>) -> Self {
        debug_assert_eq!(ends.len(), self.ends.len());
        Self { ends, weights: self.weights.clone() }
    }
}

/// Initial dimension measure of the squared Bessel model, supported on `[0, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InitialMeasure", into = "InitialMeasure")]
pub struct DimensionSpec {
    measure: InitialMeasure,
}

impl TryFrom<InitialMeasure> for DimensionSpec {
    type Error = Error;

    fn try_from(m: InitialMeasure) -> Result<Self> {
        Self::new(m)
    }
}

impl From<DimensionSpec> for InitialMeasure {
    fn from(d: DimensionSpec) -> Self {
        d.measure
    }
}

impl DimensionSpec {
    pub fn new(measure: InitialMeasure) -> Result<Self> {
        if measure.singular_points().first().is_some_and(|&x| x < 0.0) {
            return Err(invalid("delta0", "dimensions must be >= 0"));
        }
        Ok(Self { measure })
    }

    pub fn zero() -> Self {
        Self { measure: InitialMeasure::zero() }
    }

    pub fn measure(&self) -> &InitialMeasure {
        &self.measure
    }

    /// Total mass `Delta0(R)`.
    pub fn delta_bar(&self) -> f64 {
        self.measure.total_mass()
    }

    /// `int delta Delta0(d delta)`.
    pub fn mu(&self) -> f64 {
        self.measure.first_moment()
    }

    /// One draw from the normalized dimension law; 0 for the zero measure.
    pub(crate) fn draw(&self, rng: &mut RngStream) -> f64 {
        if self.delta_bar() <= 0.0 {
            0.0
        } else {
            self.measure.quantile_unchecked(rng.uniform())
        }
    }
}
