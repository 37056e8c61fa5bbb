use serde::{Deserialize, Serialize};

use super::measure::{AtomicMeasure, DimensionSpec, InitialMeasure};
use crate::branchkit::{besq_step, feller_step};
use crate::contcoal::advance_blocks;
use crate::contcoal::FreeBlocks;
use crate::error::{check_positive, invalid, Result};
use crate::randkit::RngStream;

/// Size, branching rate, horizon and Euler step of a particle-system experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub m: usize,
    pub gamma: f64,
    pub t: f64,
    pub step: f64,
}

impl SystemParams {
    pub fn new(m: usize, gamma: f64, t: f64, step: f64) -> Result<Self> {
        let p = Self { m, gamma, t, step };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("m", "must be >= 1"));
        }
        check_positive("gamma", self.gamma)?;
        check_positive("t", self.t)?;
        check_positive("step", self.step)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particles {
    /// Sorted initial positions.
    pub positions: Vec<f64>,
    pub masses: Vec<f64>,
}

/// `m` iid positions from `Z0 / z`, sorted, each carrying mass `z / m`.
pub fn init_particles(z0: &InitialMeasure, m: usize, rng: &mut RngStream) -> Result<Particles> {
    if m == 0 {
        return Err(invalid("m", "must be >= 1"));
    }
    let positions = z0.sample_sorted(m, rng)?;
    let w = z0.total_mass() / m as f64;
    Ok(Particles { masses: vec![w; m], positions })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum MassLaw {
    Feller { gamma: f64 },
    Besq,
}

/// Branching-coalescing particle system, stored per coalesced block.
///
/// A block's mass is the sum of its particles' masses, which by additivity is again a
/// Feller (or squared Bessel) process of the summed initial mass and dimension. Blocks
/// whose mass is absorbed at 0 are discarded; the survivors still move as coalescing
/// Brownian motions.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    blocks: FreeBlocks,
    mass: Vec<f64>,
    dim: Vec<f64>,
    law: MassLaw,
    time: f64,
}

impl ParticleSystem {
    pub fn feller(z0: &InitialMeasure, m: usize, gamma: f64, rng: &mut RngStream) -> Result<Self> {
        check_positive("gamma", gamma)?;
        let p = init_particles(z0, m, rng)?;
        let blocks = FreeBlocks::from_sorted(&p.positions);
        let w = z0.total_mass() / m as f64;
        let mass = blocks.size.iter().map(|&s| s as f64 * w).collect();
        let dim = vec![0.0; blocks.len()];
        Ok(Self { blocks, mass, dim, law: MassLaw::Feller { gamma }, time: 0.0 })
    }

    /// The squared Bessel model: particle `i` gets dimension `delta_i * delta_bar / m`
    /// with `delta_i` iid from the normalized dimension measure.
    pub fn besq(z0: &InitialMeasure, delta0: &DimensionSpec, m: usize, rng: &mut RngStream) -> Result<Self> {
        let p = init_particles(z0, m, rng)?;
        let blocks = FreeBlocks::from_sorted(&p.positions);
        let w = z0.total_mass() / m as f64;
        let scale = delta0.delta_bar() / m as f64;
        let mass = blocks.size.iter().map(|&s| s as f64 * w).collect();
        let dim = blocks
            .size
            .iter()
            .map(|&s| (0..s).map(|_| delta0.draw(rng)).sum::<f64>() * scale)
            .collect();
        Ok(Self { blocks, mass, dim, law: MassLaw::Besq, time: 0.0 })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Free block positions, strictly increasing.
    pub fn positions(&self) -> &[f64] {
        &self.blocks.pos
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Number of blocks carrying positive mass.
    pub fn support_size(&self) -> usize {
        self.mass.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn measure(&self) -> AtomicMeasure {
        AtomicMeasure::from_sorted_unchecked(&self.blocks.pos, &self.mass)
    }

    /// `sum_i (delta_i delta_bar / m) delta_{X_i}`; zero for the Feller system.
    pub fn dimension_measure(&self) -> AtomicMeasure {
        AtomicMeasure::from_sorted_unchecked(&self.blocks.pos, &self.dim)
    }

    pub fn advance(&mut self, dt: f64, step: f64, rng: &mut RngStream) -> Result<()> {
        check_positive("dt", dt)?;
        check_positive("step", step)?;
        self.advance_masses(dt, rng);
        self.advance_positions(dt, step, rng);
        Ok(())
    }

    /// Mass transitions for the current blocks, then removal of absorbed blocks.
    pub(crate) fn advance_masses(&mut self, dt: f64, rng: &mut RngStream) {
        match self.law {
            MassLaw::Feller { gamma } => {
                for w in &mut self.mass {
                    *w = feller_step(*w, dt, gamma, rng);
                }
            }
            MassLaw::Besq => {
                for (w, &d) in self.mass.iter_mut().zip(&self.dim) {
                    *w = besq_step(*w, dt, d, rng);
                }
            }
        }
        self.prune();
    }

    fn prune(&mut self) {
        let keep: Vec<bool> = self.mass.iter().zip(&self.dim).map(|(&w, &d)| w > 0.0 || d > 0.0).collect();
        if keep.iter().all(|&k| k) {
            return;
        }
        let mut it = keep.iter();
        self.blocks.pos.retain(|_| *it.next().expect("aligned"));
        let mut it = keep.iter();
        self.blocks.size.retain(|_| *it.next().expect("aligned"));
        let mut it = keep.iter();
        self.mass.retain(|_| *it.next().expect("aligned"));
        let mut it = keep.iter();
        self.dim.retain(|_| *it.next().expect("aligned"));
    }

    /// Coalescing motion of the blocks; merged blocks add masses and dimensions.
    pub(crate) fn advance_positions(&mut self, dt: f64, step: f64, rng: &mut RngStream) {
        self.time += dt;
        if self.blocks.is_empty() {
            return;
        }
        let before = self.blocks.size.clone();
        advance_blocks(&mut self.blocks, dt, step, rng).expect("validated step");
        if self.blocks.len() == before.len() {
            return;
        }
        let mut k = 0;
        let mut mass = Vec::with_capacity(self.blocks.len());
        let mut dim = Vec::with_capacity(self.blocks.len());
        for &s in &self.blocks.size {
            let (mut covered, mut w, mut d) = (0, 0.0, 0.0);
            while covered < s {
                covered += before[k];
                w += self.mass[k];
                d += self.dim[k];
                k += 1;
            }
            mass.push(w);
            dim.push(d);
        }
        self.mass = mass;
        self.dim = dim;
    }
}

/// `Z^(m)_t`: coalescing positions, Feller masses, coincident masses summed.
pub fn simulate_zm(z0: &InitialMeasure, p: &SystemParams, rng: &mut RngStream) -> Result<AtomicMeasure> {
    p.validate()?;
    let mut sys = ParticleSystem::feller(z0, p.m, p.gamma, rng)?;
    sys.advance(p.t, p.step, rng)?;
    Ok(sys.measure())
}

/// `(Z^(m)_t, Delta^(m)_t)` of the squared Bessel model.
pub fn besq_model_simulate(
    z0: &InitialMeasure,
    delta0: &DimensionSpec,
    m: usize,
    t: f64,
    step: f64,
    rng: &mut RngStream,
) -> Result<(AtomicMeasure, AtomicMeasure)> {
    let mut sys = ParticleSystem::besq(z0, delta0, m, rng)?;
    sys.advance(t, step, rng)?;
    Ok((sys.measure(), sys.dimension_measure()))
}
