//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

/// Tolerances and truncation radius for the closed-form evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Gaussian tails are cut this many standard deviations from their centre.
    pub radius: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, radius: 8.0, max_subdivisions: 2000 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        check_positive("rel_tol", self.rel_tol)?;
        check_positive("abs_tol", self.abs_tol)?;
        check_positive("radius", self.radius)?;
        if self.max_subdivisions == 0 {
            return Err(crate::error::invalid("max_subdivisions", "must be >= 1"));
        }
        Ok(())
    }

    /// Tighter tolerances for an integral nested inside another.
    pub(crate) fn inner(&self) -> Self {
        Self { rel_tol: self.rel_tol * 0.1, abs_tol: self.abs_tol * 0.1, ..*self }
    }
}

/// A quadrature value with its estimated absolute error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Quad {
    type Output = Quad;

    fn add(self, o: Quad) -> Quad {
        Quad { value: self.value + o.value, error: self.error + o.error }
    }
}

impl Quad {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { value: self.value * c, error: self.error * c.abs() }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
/// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Quad {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Quad { value: k * h, error: ((k - g) * h).abs() }
}

struct Piece {
    a: f64,
    b: f64,
    q: Quad,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.q.error == o.q.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.q.error.total_cmp(&o.q.error)
    }
}

/// `int_a^b f`, with the interval first split at the given interior `breaks`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<Quad> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(crate::error::invalid("limits", "integration limits must be finite"));
    }
    if a == b {
        return Ok(Quad::default());
    }
    if b < a {
        return Ok(integrate(f, b, a, breaks, spec)?.scale(-1.0));
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut heap = BinaryHeap::new();
    let mut total = Quad::default();
    for w in pts.windows(2) {
        let q = gk15(&mut f, w[0], w[1]);
        total = total + q;
        heap.push(Piece { a: w[0], b: w[1], q });
    }
    let mut splits = 0;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.value.abs());
        if total.error <= tol {
            break;
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if splits >= spec.max_subdivisions || mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature { error_estimate: total.error, tolerance: tol });
        }
        splits += 1;
        let l = gk15(&mut f, worst.a, mid);
        let r = gk15(&mut f, mid, worst.b);
        // Re-sum rather than update incrementally so round-off does not drift.
        heap.push(Piece { a: worst.a, b: mid, q: l });
        heap.push(Piece { a: mid, b: worst.b, q: r });
        total = heap.iter().fold(Quad::default(), |s, p| s + p.q);
    }
    Ok(total)
}
