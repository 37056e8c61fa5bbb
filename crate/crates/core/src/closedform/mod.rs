//! Numerical evaluation of the explicit laws of the limiting process: empty intervals,
//! support counts, atom masses, the range of the last particle, and the times `tau`,
//! `T` and location `F`.

mod formulas;
mod kernel;
mod quad;

pub use formulas::{
    expected_support_count, f_location_cdf, last_particle_range, occupation_zero, point_mass_laplace_interval,
    prob_interval_empty, rotate_coords, t_extinction_cdf, tau_cdf, FormulaVariant, TiltedCoords,
};
pub use quad::{integrate, Quad, QuadratureSpec};
