//! The two three-dimensional examples: a non-regular system whose control
//! sets are points, and a controllable system with a rotating drift.
//!
//! The first example is studied in the normal-form coordinates of
//! [`FieldSystem::example1_conjugated`], where
//! `F(x, y, z) = 6zσ + y(y² − 2xσ)` grows along every trajectory. The second
//! lives on the Heisenberg group with `[e1, e2] = −e3`, see
//! [`LinearControlSystem::example2`](crate::dynamics::LinearControlSystem::example2).

mod steer;

use nalgebra::{dvector, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::GroupPoint;
use crate::dynamics::{endpoint_direct, ControlRange, FieldSystem, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::reach::random_control;

pub use steer::{
    build_ascent_plan, build_descent_plan, discrete_gramian, planar_steer, PlanLeg, SteeringPlan,
    PLANAR_SEGMENTS,
};

/// `σ < ρ`, where `ρ < 0` is the lower end of `Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    sigma: f64,
}

impl LyapunovParams {
    pub fn new(sigma: f64, rho: f64) -> Result<Self> {
        if !(sigma < rho) {
            return Err(Error::InvalidParameter(format!(
                "sigma {sigma} must be below rho {rho}"
            )));
        }
        Ok(Self { sigma })
    }

    /// Takes `ρ` from a one-channel control range.
    pub fn for_range(sigma: f64, omega: &ControlRange) -> Result<Self> {
        if omega.num_channels() != 1 {
            return Err(Error::InvalidOmega(
                "expected a single control channel".into(),
            ));
        }
        Self::new(sigma, omega.bounds()[0].0)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

pub fn lyapunov_f(p: &GroupPoint, params: LyapunovParams) -> f64 {
    let s = params.sigma;
    6.0 * p[2] * s + p[1] * (p[1] * p[1] - 2.0 * p[0] * s)
}

/// Solution of the normal form under a constant control.
pub fn example1_closed_form(p0: &GroupPoint, u: f64, s: f64) -> GroupPoint {
    let (x0, y0, z0) = (p0[0], p0[1], p0[2]);
    dvector![
        x0 + y0 * s + u * s * s / 2.0,
        y0 + s * u,
        z0 + (2.0 * x0 * u - y0 * y0) * s / 6.0
    ]
}

/// Solution of the rotation example under a constant control.
pub fn example2_closed_form(p0: &GroupPoint, u: f64, s: f64) -> GroupPoint {
    let (x0, y0, z0) = (p0[0], p0[1], p0[2]);
    let (sn, cs) = s.sin_cos();
    dvector![
        (x0 + u) * cs - y0 * sn - u,
        (x0 + u) * sn + y0 * cs,
        z0 - u / 2.0 * ((x0 + u) * sn + y0 * (cs - 1.0)) + u * u / 2.0 * s
    ]
}

/// Outcome of [`verify_singleton_control_sets`].
#[derive(Debug, Clone, PartialEq)]
pub struct SingletonReport {
    pub samples: usize,
    /// Samples where `F` dropped by more than `1e-9`.
    pub monotonicity_violations: usize,
    pub worst_change: f64,
    /// Samples with `|y₀| ≥ 0.1`, or a segment with `|u| ≥ 0.1` lasting at
    /// least `0.1`.
    pub strict_cases: usize,
    /// Qualifying samples where `F` grew by less than `1e-6`.
    pub strict_violations: usize,
    pub smallest_strict_increase: f64,
}

impl SingletonReport {
    pub fn passed(&self) -> bool {
        self.monotonicity_violations == 0 && self.strict_violations == 0
    }
}

const MONOTONE_TOL: f64 = 1e-9;
const STRICT_MIN: f64 = 1e-6;
const QUALIFY: f64 = 0.1;
const START_BOX: f64 = 2.0;
const MIN_HORIZON: f64 = 0.1;

/// Integrates the normal form from random starts under random controls and
/// checks that `F` never decreases, and grows when the trajectory leaves
/// the plane `y = 0`. Horizons are drawn from `[0.1, horizon]`.
pub fn verify_singleton_control_sets(
    params: LyapunovParams,
    omega: &ControlRange,
    n_samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<SingletonReport> {
    if !(horizon >= MIN_HORIZON) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be at least {MIN_HORIZON}, got {horizon}"
        )));
    }
    LyapunovParams::for_range(params.sigma, omega)?;
    let sys = FieldSystem::example1_conjugated(omega.clone())?;
    let outcomes: Vec<(f64, bool)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX - i as u64);
            let p0 = DVector::from_fn(3, |_, _| rng.random_range(-START_BOX..START_BOX));
            let s = rng.random_range(MIN_HORIZON..=horizon);
            let u = random_control(omega, s, i, seed);
            let end = endpoint_direct(&sys, &p0, &u, s, DEFAULT_STEP)?;
            let change = lyapunov_f(&end, params) - lyapunov_f(&p0, params);
            let qualifies = p0[1].abs() >= QUALIFY
                || u.segments()
                    .iter()
                    .any(|(d, v)| *d >= QUALIFY && v[0].abs() >= QUALIFY);
            Ok((change, qualifies))
        })
        .collect::<Result<_>>()?;
    let mut report = SingletonReport {
        samples: n_samples,
        monotonicity_violations: 0,
        worst_change: f64::INFINITY,
        strict_cases: 0,
        strict_violations: 0,
        smallest_strict_increase: f64::INFINITY,
    };
    for (change, qualifies) in outcomes {
        report.worst_change = report.worst_change.min(change);
        if change < -MONOTONE_TOL {
            report.monotonicity_violations += 1;
        }
        if qualifies {
            report.strict_cases += 1;
            report.smallest_strict_increase = report.smallest_strict_increase.min(change);
            if change < STRICT_MIN {
                report.strict_violations += 1;
            }
        }
    }
    Ok(report)
}
