use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::algebra::{GroupPoint, LieAlgebra};
use crate::dynamics::{
    endpoint_direct, fixed_point_determinant, larc_check, regularity, ControlSystem,
    LinearControlSystem, PiecewiseControl, DEFAULT_STEP,
};
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;
use crate::jet::{self, Dual, Scalar};
use crate::reach::cloud::sample_reachable;

pub const NEWTON_MAX_ITER: usize = 100;
/// Newton stops once `|f_S(x) − y|∞ ≤ NEWTON_TOL · max(1, |y|∞)`.
pub const NEWTON_TOL: f64 = 1e-11;
/// `|det(I − e^{SA})|` at or below this marks `S` as exceptional.
pub const EXCEPTIONAL_DET_TOL: f64 = 1e-10;
/// Periodic-return residual accepted by [`seed_control_set`].
pub const RETURN_TOL: f64 = 1e-6;

const MAX_HALVINGS: usize = 40;

fn f_s_eval<T: Scalar>(algebra: &LieAlgebra, flow: &DMatrix<f64>, x: &[T]) -> Vec<T> {
    let n = x.len();
    let flowed: Vec<T> = (0..n)
        .map(|i| {
            (0..n).fold(T::zero(), |acc, j| {
                let c = flow[(i, j)];
                if c == 0.0 {
                    acc
                } else {
                    acc - T::from_f64(c) * x[j]
                }
            })
        })
        .collect();
    algebra.multiply_slice(x, &flowed)
}

/// Jacobian of `f_S` at `x`, exact up to rounding.
pub fn f_s_jacobian(
    algebra: &LieAlgebra,
    a: &DMatrix<f64>,
    s: f64,
    x: &GroupPoint,
) -> DMatrix<f64> {
    jacobian_with_flow(algebra, &matrix_exponential(a, s), x.as_slice())
}

fn jacobian_with_flow(algebra: &LieAlgebra, flow: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut dir = vec![0.0; n];
    for k in 0..n {
        dir[k] = 1.0;
        let col: Vec<Dual> = f_s_eval(algebra, flow, &jet::seed(x, &dir));
        for (i, d) in col.iter().enumerate() {
            jac[(i, k)] = d.eps;
        }
        dir[k] = 0.0;
    }
    jac
}

fn residual(algebra: &LieAlgebra, flow: &DMatrix<f64>, x: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let r: Vec<f64> = f_s_eval(algebra, flow, x)
        .iter()
        .zip(y)
        .map(|(f, t)| f - t)
        .collect();
    let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (r, norm)
}

/// Solves `f_S(x) = y` by damped Newton, starting from the solution of the
/// linear part `(I − e^{SA}) x = y`.
pub fn invert_f_s(
    algebra: &LieAlgebra,
    a: &DMatrix<f64>,
    s: f64,
    y: &GroupPoint,
) -> Result<GroupPoint> {
    let n = algebra.dim();
    algebra.check_len(y.len())?;
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.nrows(),
        });
    }
    let flow = matrix_exponential(a, s);
    let linear = DMatrix::identity(n, n) - &flow;
    let lu = linear.lu();
    let det = lu.determinant();
    if det.abs() <= EXCEPTIONAL_DET_TOL {
        return Err(Error::ExceptionalTime { time: s, det });
    }
    let mut x: Vec<f64> = lu.solve(y).expect("nonsingular").as_slice().to_vec();
    let target = y.as_slice();
    let tol = NEWTON_TOL * y.amax().max(1.0);
    let (mut r, mut norm) = residual(algebra, &flow, &x, target);
    for iter in 0..NEWTON_MAX_ITER {
        if norm <= tol {
            return Ok(DVector::from_vec(x));
        }
        let jac = jacobian_with_flow(algebra, &flow, &x);
        let rhs = -DVector::from_column_slice(&r);
        let Some(dx) = jac.lu().solve(&rhs) else {
            return Err(Error::NewtonDivergence {
                iterations: iter,
                residual: norm,
            });
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x
                .iter()
                .zip(dx.iter())
                .map(|(xi, di)| xi + lambda * di)
                .collect();
            let (tr, tn) = residual(algebra, &flow, &trial, target);
            if tn < norm {
                x = trial;
                r = tr;
                norm = tn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence {
                iterations: iter,
                residual: norm,
            });
        }
    }
    if norm <= tol {
        Ok(DVector::from_vec(x))
    } else {
        Err(Error::NewtonDivergence {
            iterations: NEWTON_MAX_ITER,
            residual: norm,
        })
    }
}

/// Points of the unique control set of a regular system, obtained as
/// `f_S⁻¹(y)` for sampled `y ∈ O⁺_S(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedCloud {
    pub horizon: f64,
    pub points: Vec<GroupPoint>,
    /// Control that brings each point back to itself in time `horizon`.
    pub controls: Vec<PiecewiseControl>,
    /// `|φ(S, x, u) − x|∞` from a direct re-integration.
    pub residuals: Vec<f64>,
    /// Samples dropped because Newton failed.
    pub skipped: usize,
}

impl SeedCloud {
    pub fn passing(&self, tol: f64) -> usize {
        self.residuals.iter().filter(|&&r| r <= tol).count()
    }

    pub fn pass_fraction(&self, tol: f64) -> f64 {
        if self.residuals.is_empty() {
            0.0
        } else {
            self.passing(tol) as f64 / self.residuals.len() as f64
        }
    }
}

pub fn seed_control_set(
    sys: &LinearControlSystem,
    s: f64,
    n: usize,
    seed: u64,
) -> Result<SeedCloud> {
    let reg = regularity(sys.derivation());
    if !reg.regular {
        return Err(Error::NotRegular { det: reg.det });
    }
    let rank = larc_check(sys);
    if !rank.satisfied() {
        return Err(Error::RankConditionFails {
            rank: rank.rank,
            dim: rank.dim,
        });
    }
    let algebra = sys.algebra();
    let a = sys.derivation();
    let det = fixed_point_determinant(a, s);
    if det.abs() <= EXCEPTIONAL_DET_TOL {
        return Err(Error::ExceptionalTime { time: s, det });
    }
    let cloud = sample_reachable(sys, &DVector::zeros(sys.dim()), s, n, seed)?;
    let results: Vec<Option<(GroupPoint, PiecewiseControl, f64)>> = cloud
        .points
        .par_iter()
        .zip(cloud.controls.par_iter())
        .map(|(y, u)| match invert_f_s(algebra, a, s, y) {
            Ok(x) => {
                let back = endpoint_direct(sys, &x, u, s, DEFAULT_STEP).ok()?;
                let res = (back - &x).amax();
                Some((x, u.clone(), res))
            }
            Err(_) => None,
        })
        .collect();
    let mut out = SeedCloud {
        horizon: s,
        points: Vec::new(),
        controls: Vec::new(),
        residuals: Vec::new(),
        skipped: 0,
    };
    for r in results {
        match r {
            Some((x, u, res)) => {
                out.points.push(x);
                out.controls.push(u);
                out.residuals.push(res);
            }
            None => out.skipped += 1,
        }
    }
    Ok(out)
}
