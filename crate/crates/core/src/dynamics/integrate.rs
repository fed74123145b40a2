//! Fixed-step RK4 under piecewise-constant controls.
//!
//! Steps never straddle a control switch: inside every segment the step is
//! `h` except for the last one, which is shortened to land on the switch
//! (or on the final time) exactly.

use nalgebra::DVector;

use crate::algebra::GroupPoint;
use crate::dynamics::system::{ControlSystem, LinearControlSystem, PiecewiseControl};
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Sampled solution `t ↦ φ(t, x0, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<GroupPoint>,
    pub control: PiecewiseControl,
}

impl Trajectory {
    pub fn last(&self) -> &GroupPoint {
        self.points
            .last()
            .expect("trajectory has at least one point")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one time")
    }
}

fn check_args<S: ControlSystem + ?Sized>(
    sys: &S,
    x0: &DVector<f64>,
    u: &PiecewiseControl,
    horizon: f64,
    h: f64,
) -> Result<()> {
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: x0.len(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {h}"
        )));
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    let total = u.total_duration();
    if horizon > total * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} exceeds the control duration {total}"
        )));
    }
    u.check_range(sys.omega())
}

fn rk4_step<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &mut [f64], dt: f64) {
    let n = x.len();
    let k1 = f(x);
    let tmp: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k1[i]).collect();
    let k2 = f(&tmp);
    let tmp: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k2[i]).collect();
    let k3 = f(&tmp);
    let tmp: Vec<f64> = (0..n).map(|i| x[i] + dt * k3[i]).collect();
    let k4 = f(&tmp);
    for i in 0..n {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Walks the control segments up to `horizon`, calling `record(t, x)` after
/// every step (and once at `t = 0`).
fn march<S, R>(
    sys: &S,
    x0: &[f64],
    u: &PiecewiseControl,
    horizon: f64,
    h: f64,
    mut record: R,
) -> Vec<f64>
where
    S: ControlSystem + ?Sized,
    R: FnMut(f64, &[f64]),
{
    let mut x = x0.to_vec();
    let mut t = 0.0;
    record(t, &x);
    let mut seg_start = 0.0;
    for (duration, value) in u.segments() {
        if seg_start >= horizon {
            break;
        }
        let seg_end = (seg_start + duration).min(horizon);
        let len = seg_end - seg_start;
        let steps = ((len / h) * (1.0 - 1e-12)).ceil().max(0.0) as usize;
        let uv = value.as_slice();
        let f = |p: &[f64]| sys.field(uv, p);
        for k in 0..steps {
            let local = k as f64 * h;
            let dt = if k + 1 == steps { len - local } else { h };
            if dt <= 0.0 {
                continue;
            }
            rk4_step(&f, &mut x, dt);
            t = if k + 1 == steps {
                seg_end
            } else {
                seg_start + local + h
            };
            record(t, &x);
        }
        seg_start += duration;
    }
    x
}

/// RK4 on the full vector field, started at `x0`. Works for any
/// control-affine system.
pub fn integrate_direct<S: ControlSystem + ?Sized>(
    sys: &S,
    x0: &GroupPoint,
    u: &PiecewiseControl,
    horizon: f64,
    h: f64,
) -> Result<Trajectory> {
    check_args(sys, x0, u, horizon, h)?;
    let mut times = Vec::new();
    let mut points = Vec::new();
    march(sys, x0.as_slice(), u, horizon, h, |t, x| {
        times.push(t);
        points.push(DVector::from_row_slice(x));
    });
    Ok(Trajectory {
        times,
        points,
        control: u.clone(),
    })
}

/// Final point of [`integrate_direct`] without storing the path.
pub fn endpoint_direct<S: ControlSystem + ?Sized>(
    sys: &S,
    x0: &GroupPoint,
    u: &PiecewiseControl,
    horizon: f64,
    h: f64,
) -> Result<GroupPoint> {
    check_args(sys, x0, u, horizon, h)?;
    let x = march(sys, x0.as_slice(), u, horizon, h, |_, _| {});
    Ok(DVector::from_vec(x))
}

/// Solution of a linear control system. Only the trajectory through the
/// identity is integrated; the result is its right translate
/// `φ(t, x0, u) = φ(t, e, u) · φ_t(x0)`.
pub fn integrate(
    sys: &LinearControlSystem,
    x0: &GroupPoint,
    u: &PiecewiseControl,
    horizon: f64,
    h: f64,
) -> Result<Trajectory> {
    check_args(sys, x0, u, horizon, h)?;
    let n = sys.dim();
    let algebra = sys.algebra();
    let a = sys.derivation();
    let mut times = Vec::new();
    let mut points = Vec::new();
    march(sys, &vec![0.0; n], u, horizon, h, |t, y| {
        let flowed = if t == 0.0 {
            x0.clone()
        } else {
            matrix_exponential(a, t) * x0
        };
        times.push(t);
        points.push(DVector::from_vec(
            algebra.multiply_slice(y, flowed.as_slice()),
        ));
    });
    Ok(Trajectory {
        times,
        points,
        control: u.clone(),
    })
}

/// Final point of [`integrate`] without storing the path.
pub fn endpoint(
    sys: &LinearControlSystem,
    x0: &GroupPoint,
    u: &PiecewiseControl,
    horizon: f64,
    h: f64,
) -> Result<GroupPoint> {
    let y = identity_endpoint(sys, u, horizon, h)?;
    let flowed = sys.linear_flow(horizon, x0);
    sys.algebra().check_len(x0.len())?;
    Ok(DVector::from_vec(
        sys.algebra()
            .multiply_slice(y.as_slice(), flowed.as_slice()),
    ))
}

/// `φ(horizon, e, u)`.
pub fn identity_endpoint(
    sys: &LinearControlSystem,
    u: &PiecewiseControl,
    horizon: f64,
    h: f64,
) -> Result<GroupPoint> {
    let e = DVector::zeros(sys.dim());
    endpoint_direct(sys, &e, u, horizon, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::system::{ControlRange, FieldSystem};
    use nalgebra::dvector;
    use std::f64::consts::PI;

    fn unit() -> ControlRange {
        ControlRange::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn conjugated_example1_from_origin() {
        let sys = FieldSystem::example1_conjugated(unit()).unwrap();
        let u = PiecewiseControl::constant(dvector![1.0], 1.0).unwrap();
        let tr = integrate_direct(&sys, &DVector::zeros(3), &u, 1.0, DEFAULT_STEP).unwrap();
        assert!((tr.last() - dvector![0.5, 1.0, 0.0]).amax() < 1e-8);
        assert_eq!(tr.final_time(), 1.0);
        assert_eq!(tr.times.len(), 1001);
    }

    #[test]
    fn zero_control_keeps_identity() {
        let sys = LinearControlSystem::example2(unit()).unwrap();
        let u = PiecewiseControl::constant(dvector![0.0], 3.7).unwrap();
        let tr = integrate(&sys, &DVector::zeros(3), &u, 3.7, DEFAULT_STEP).unwrap();
        assert!(tr.points.iter().all(|p| p.amax() == 0.0));
    }

    #[test]
    fn example2_full_turn() {
        let sys = LinearControlSystem::example2(unit()).unwrap();
        let u = PiecewiseControl::constant(dvector![1.0], 2.0 * PI).unwrap();
        let end = endpoint(&sys, &DVector::zeros(3), &u, 2.0 * PI, DEFAULT_STEP).unwrap();
        assert!((end - dvector![0.0, 0.0, PI]).amax() < 1e-8);
    }

    #[test]
    fn horizon_inside_a_segment() {
        let sys = LinearControlSystem::example1(unit()).unwrap();
        let u = PiecewiseControl::new(vec![(0.3, dvector![1.0]), (1.0, dvector![-1.0])]).unwrap();
        let tr = integrate(&sys, &DVector::zeros(3), &u, 0.75, 0.1).unwrap();
        assert_eq!(tr.final_time(), 0.75);
        // steps: 0.1 0.2 0.3 | 0.4 0.5 0.6 0.7 0.75
        assert_eq!(tr.times.len(), 9);
        assert!(tr.times.contains(&0.3));
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let sys = LinearControlSystem::example2(unit()).unwrap();
        let u = PiecewiseControl::constant(dvector![1.0], 1.0).unwrap();
        let x0 = dvector![0.1, 0.2, 0.3];
        let tr = integrate(&sys, &x0, &u, 0.0, DEFAULT_STEP).unwrap();
        assert_eq!(tr.points, vec![x0]);
    }

    #[test]
    fn argument_errors() {
        let sys = LinearControlSystem::example2(unit()).unwrap();
        let u = PiecewiseControl::constant(dvector![1.0], 1.0).unwrap();
        let x0 = DVector::zeros(3);
        assert!(integrate(&sys, &x0, &u, 2.0, 1e-3).is_err());
        assert!(integrate(&sys, &x0, &u, 1.0, 0.0).is_err());
        let big = PiecewiseControl::constant(dvector![3.0], 1.0).unwrap();
        assert!(matches!(
            integrate(&sys, &x0, &big, 1.0, 1e-3),
            Err(Error::ControlOutOfRange { .. })
        ));
    }
}
