use serde::{Deserialize, Serialize};

use super::measure::{AtomicMeasure, InitialMeasure};
use super::system::ParticleSystem;
use crate::branchkit::feller_step;
use crate::contcoal::FlowGrid;
use crate::error::{check_positive, invalid, Result};
use crate::randkit::RngStream;

/// Observed hitting statistics of one path on an observation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// First grid time with at most one positive-mass atom.
    pub tau_hat: Option<f64>,
    /// First grid time with zero total mass.
    pub t_hat: Option<f64>,
    /// Location at the last grid time with positive mass.
    pub f_hat: Option<f64>,
    /// `f_hat` moved on to the extinction time, sampled from its conditional law
    /// within the final grid interval.
    pub f_exact: Option<f64>,
    /// Number of positive-mass atoms at each grid time.
    pub support_counts: Vec<usize>,
}

impl PathStats {
    /// True when mass survives to the end of the grid, so `T` is right-censored.
    pub fn censored(&self) -> bool {
        self.t_hat.is_none()
    }
}

pub fn path_stats(
    z0: &InitialMeasure,
    m: usize,
    gamma: f64,
    t_grid: &[f64],
    step: f64,
    rng: &mut RngStream,
) -> Result<PathStats> {
    if t_grid.is_empty() || t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("t_grid", "must be nonempty, positive and strictly increasing"));
    }
    check_positive("step", step)?;
    let mut sys = ParticleSystem::feller(z0, m, gamma, rng)?;
    let mut out = PathStats { tau_hat: None, t_hat: None, f_hat: None, f_exact: None, support_counts: vec![] };
    let mut prev = 0.0;
    let (mut pos_before, mut mass_before) = (Vec::new(), Vec::new());
    for &t in t_grid {
        let dt = t - prev;
        // Masses are independent of the motion and add under merging, so they can be
        // stepped first; positions are then still those at the previous grid time.
        pos_before.clear();
        pos_before.extend_from_slice(sys.positions());
        mass_before.clear();
        mass_before.extend_from_slice(sys.masses());
        sys.advance_masses(dt, rng);
        let alive = sys.support_size();
        if alive == 0 && !pos_before.is_empty() {
            let (f, f_exact) = last_survivor(&pos_before, &mass_before, dt, gamma, rng);
            out.f_hat = Some(f);
            out.f_exact = Some(f_exact);
        }
        if alive > 0 {
            sys.advance_positions(dt, step, rng);
        }
        out.support_counts.push(alive);
        if alive <= 1 && out.tau_hat.is_none() {
            out.tau_hat = Some(t);
        }
        if alive == 0 {
            out.t_hat = Some(t);
            out.support_counts.resize(t_grid.len(), 0);
            return Ok(out);
        }
        prev = t;
    }
    // Censored path: report the current location of the largest atom.
    let (k, _) = sys.masses().iter().enumerate().fold((0, 0.0), |b, (k, &w)| if w > b.1 { (k, w) } else { b });
    out.f_hat = Some(sys.positions()[k]);
    Ok(out)
}

/// Given blocks at `pos` with masses `mass` that all die within `dt`, picks the one
/// that dies last and moves it to its death time. Each Feller extinction time `s`
/// from `x` satisfies `P{s <= r} = exp(-2x/(gamma r))`, conditioned here on `s <= dt`.
fn last_survivor(pos: &[f64], mass: &[f64], dt: f64, gamma: f64, rng: &mut RngStream) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (&x, &w) in pos.iter().zip(mass) {
        let c = 2.0 * w / gamma;
        let s = c / (c / dt - rng.uniform_open0().ln());
        if s > best.0 {
            best = (s, x);
        }
    }
    let (s, x) = best;
    (x, x + s.sqrt() * rng.std_normal())
}

/// Does the grid's cell cover contain all the mass of `z0`?
pub fn flow_covers(grid: &FlowGrid, z0: &InitialMeasure) -> bool {
    let (l, r) = (grid.cell(0).0, grid.boundaries[grid.boundaries.len() - 1]);
    (z0.mass_closed_open(l, r) - z0.total_mass()).abs() <= 1e-12 * z0.total_mass().max(1.0)
        && z0.support_hull().is_none_or(|(a, b)| a >= l && b < r)
}

/// `Z_t` built on a coalescing flow skeleton: image `i` carries a Feller transition of
/// the initial mass of its preimage cell.
pub fn flow_construct_zt(z0: &InitialMeasure, gamma: f64, grid: &FlowGrid, rng: &mut RngStream) -> Result<AtomicMeasure> {
    check_positive("gamma", gamma)?;
    let masses: Vec<f64> = (0..grid.images.len())
        .map(|i| {
            let (l, r) = grid.cell(i);
            feller_step(z0.mass_closed_open(l, r), grid.t, gamma, rng)
        })
        .collect();
    Ok(AtomicMeasure::from_sorted_unchecked(&grid.images, &masses))
}
