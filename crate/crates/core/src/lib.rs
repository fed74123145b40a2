//! Linear control systems on simply connected nilpotent Lie groups.
//!
//! States live in exponential coordinates, so the group is its Lie algebra
//! with the truncated BCH product. A system is a derivation `A` (the drift),
//! right-invariant control vectors and a box `Ω` of control values.
//!
//! ```
//! use nalgebra::dvector;
//! use nilpotent_lcs::dynamics::*;
//!
//! let sys = LinearControlSystem::regular_heisenberg();
//! assert!(larc_check(&sys).satisfied());
//! let u = PiecewiseControl::constant(dvector![1.0, 0.0], 0.5).unwrap();
//! let x = endpoint(&sys, &dvector![0.0, 0.0, 0.0], &u, 0.5, DEFAULT_STEP).unwrap();
//! assert!((x[0] - (0.5f64.exp() - 1.0)).abs() < 1e-9);
//! ```
//!
//! The guide in `book/` walks through each module; its code blocks run as
//! doctests of this crate.

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod heisenberg;
pub mod io;
pub mod jet;
pub mod reach;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/algebra.md")]
    mod algebra {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/structure.md")]
    mod structure {}
    #[doc = include_str!("../../../book/src/reachability.md")]
    mod reachability {}
    #[doc = include_str!("../../../book/src/heisenberg.md")]
    mod heisenberg {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
