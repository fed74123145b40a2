//! Linear flows, trajectories and structural checks of linear control
//! systems.

mod conjugacy;
mod integrate;
mod structure;
mod system;

pub use conjugacy::{verify_conjugacy, ConjugacyReport, PolynomialMap, CONJUGACY_TOL};
pub use integrate::{
    endpoint, endpoint_direct, identity_endpoint, integrate, integrate_direct, Trajectory,
    DEFAULT_STEP,
};
pub use structure::{
    exceptional_set, f_s_map, fixed_point_determinant, larc_check, regularity, RankReport,
    RegularityReport,
};
pub use system::{
    linear_flow, ControlRange, ControlSystem, FieldSystem, LinearControlSystem, PiecewiseControl,
    StepMap,
};
