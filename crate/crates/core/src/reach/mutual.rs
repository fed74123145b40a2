use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::algebra::GroupPoint;
use crate::dynamics::{ControlSystem, PiecewiseControl, DEFAULT_STEP};
use crate::reach::cloud::sample_reachable_with_step;

const HORIZON_LEVELS: i32 = 5;
const SEARCH_STEP: f64 = 1e-2;
const SHOOT_SEGMENTS: usize = 32;
const SHOOT_ITER: usize = 40;
const SHOOT_CANDIDATES: usize = 2;

/// A control steering `x` to within `distance` of `y` in time `horizon`,
/// confirmed with the default RK4 step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachWitness {
    pub control: PiecewiseControl,
    pub horizon: f64,
    pub distance: f64,
}

fn confirm<S: ControlSystem + ?Sized>(
    sys: &S,
    x: &GroupPoint,
    y: &GroupPoint,
    u: &PiecewiseControl,
    s: f64,
    tol: f64,
) -> Option<ReachWitness> {
    let end = sys.endpoint_from(x, u, s, DEFAULT_STEP).ok()?;
    let distance = (end - y).amax();
    (distance <= tol).then(|| ReachWitness {
        control: u.clone(),
        horizon: s,
        distance,
    })
}

fn control_from(values: &[f64], m: usize, s: f64) -> PiecewiseControl {
    let d = s / SHOOT_SEGMENTS as f64;
    PiecewiseControl::new(
        values
            .chunks(m)
            .map(|v| (d, DVector::from_column_slice(v)))
            .collect(),
    )
    .expect("valid durations")
}

/// Gauss-Newton on the values of an equal-length piecewise control, using
/// minimum-norm steps and projecting onto `Ω`.
fn shoot<S: ControlSystem + ?Sized>(
    sys: &S,
    x: &GroupPoint,
    y: &GroupPoint,
    start: &PiecewiseControl,
    s: f64,
    tol: f64,
) -> Option<ReachWitness> {
    let m = sys.num_controls();
    let bounds = sys.omega().bounds().to_vec();
    let clamp = |v: &mut [f64]| {
        for (k, vi) in v.iter_mut().enumerate() {
            let (lo, hi) = bounds[k % m];
            *vi = vi.clamp(lo, hi);
        }
    };
    let d = s / SHOOT_SEGMENTS as f64;
    let mut v: Vec<f64> = (0..SHOOT_SEGMENTS)
        .flat_map(|k| {
            start
                .value_at((k as f64 + 0.5) * d)
                .iter()
                .copied()
                .collect::<Vec<_>>()
        })
        .collect();
    let end = |v: &[f64]| -> Option<DVector<f64>> {
        let u = control_from(v, m, s);
        sys.endpoint_from(x, &u, s, SEARCH_STEP).ok().map(|p| p - y)
    };
    let mut r = end(&v)?;
    for _ in 0..SHOOT_ITER {
        if r.amax() <= 0.5 * tol {
            if let Some(w) = confirm(sys, x, y, &control_from(&v, m, s), s, tol) {
                return Some(w);
            }
        }
        let delta = 1e-6;
        let cols: Vec<DVector<f64>> = (0..v.len())
            .into_par_iter()
            .map(|k| {
                let (_, hi) = bounds[k % m];
                let h = if v[k] + delta > hi { -delta } else { delta };
                let mut vp = v.clone();
                vp[k] += h;
                end(&vp)
                    .map(|rp| (rp - &r) / h)
                    .unwrap_or_else(|| DVector::zeros(r.len()))
            })
            .collect();
        let jac = DMatrix::from_columns(&cols);
        let jjt = &jac * jac.transpose();
        let mu = 1e-10 * jjt.trace().max(1e-300);
        let gram = jjt + DMatrix::identity(r.len(), r.len()) * mu;
        let w = gram.lu().solve(&r)?;
        let dv = -(jac.transpose() * w);
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let mut trial: Vec<f64> = v
                .iter()
                .zip(dv.iter())
                .map(|(a, b)| a + lambda * b)
                .collect();
            clamp(&mut trial);
            if let Some(rt) = end(&trial) {
                if rt.norm() < r.norm() {
                    v = trial;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    confirm(sys, x, y, &control_from(&v, m, s), s, tol)
}

/// Searches for a control taking `x` to within `tol` (sup norm) of `y`.
///
/// Horizons `horizon/16, horizon/8, …, horizon` are tried in turn. At each
/// one `n` random controls are sampled; if none lands close enough, the
/// best few are refined by shooting.
pub fn find_witness<S: ControlSystem + ?Sized>(
    sys: &S,
    x: &GroupPoint,
    y: &GroupPoint,
    horizon: f64,
    n: usize,
    tol: f64,
    seed: u64,
) -> Option<ReachWitness> {
    if x.len() != sys.dim() || y.len() != sys.dim() || !(horizon > 0.0) || n == 0 {
        return None;
    }
    for level in (0..HORIZON_LEVELS).rev() {
        let s = horizon / 2f64.powi(level);
        let cloud =
            sample_reachable_with_step(sys, x, s, n, seed.wrapping_add(level as u64), SEARCH_STEP)
                .ok()?;
        let mut ranked: Vec<(usize, f64)> = cloud
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - y).amax()))
            .collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        for &(i, dist) in ranked.iter().take(SHOOT_CANDIDATES) {
            if dist <= tol {
                if let Some(w) = confirm(sys, x, y, &cloud.controls[i], s, tol) {
                    return Some(w);
                }
            }
            if let Some(w) = shoot(sys, x, y, &cloud.controls[i], s, tol) {
                return Some(w);
            }
        }
    }
    None
}

/// True when a witness is found from `x` to `y` and from `y` to `x`. A
/// `false` answer only means the search failed.
pub fn mutual_reachability_check<S: ControlSystem + ?Sized>(
    sys: &S,
    x: &GroupPoint,
    y: &GroupPoint,
    horizon: f64,
    n: usize,
    tol: f64,
    seed: u64,
) -> bool {
    find_witness(sys, x, y, horizon, n, tol, seed).is_some()
        && find_witness(sys, y, x, horizon, n, tol, seed).is_some()
}
