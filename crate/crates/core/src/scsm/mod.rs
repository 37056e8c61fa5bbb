//! Measure-valued branching-coalescing particle systems and Monte Carlo estimators for
//! both sides of their duality identities.

mod duality;
mod measure;
mod paths;
mod system;

pub use duality::{
    besq_duality_check, cox_avoidance_check, dual_boxes, dual_weight, laplace_check, laplace_lhs_mc, laplace_rhs_mc,
    moment_check, BesqDualityReport, BesqExperiment, McConfig, MomentReport, PairReport,
};
pub use measure::{AtomicMeasure, DimensionSpec, InitialMeasure, IntervalUnion};
pub use paths::{flow_construct_zt, flow_covers, path_stats, PathStats};
pub use system::{besq_model_simulate, init_particles, simulate_zm, ParticleSystem, Particles, SystemParams};
