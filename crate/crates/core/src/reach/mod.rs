//! Sampled reachable sets and control-set estimators.
//!
//! Two complementary views of control sets are provided. The grid estimator
//! builds a transition graph on a box of cells and reports its strongly
//! connected components; it approximates control sets from outside. The
//! `f_S` seeding pulls sampled reachable points back through `f_S⁻¹` and
//! yields points that lie inside the unique control set of a regular system.

mod cloud;
mod fs_inverse;
mod grid;
mod mutual;

pub use cloud::{
    random_control, sample_reachable, sample_reachable_with_step, ReachableCloud, MAX_SEGMENTS,
};
pub use fs_inverse::{
    f_s_jacobian, invert_f_s, seed_control_set, SeedCloud, EXCEPTIONAL_DET_TOL, NEWTON_MAX_ITER,
    NEWTON_TOL, RETURN_TOL,
};
pub use grid::{
    control_set_estimate, grid_transition_graph, ControlSetEstimate, GridSpec, TransitionGraph,
    DEFAULT_FACE_INSET,
};
pub use mutual::{find_witness, mutual_reachability_check, ReachWitness};
