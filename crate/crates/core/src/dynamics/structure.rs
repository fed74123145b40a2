//! Structural data of a linear control system: the rank condition,
//! regularity of the drift, exceptional times and the maps
//! `f_S(x) = x · φ_S(x⁻¹)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{span_basis, AlgebraVector, GroupPoint, LieAlgebra};
use crate::dynamics::system::{linear_flow, LinearControlSystem};
use crate::expm::matrix_exponential;

/// Result of closing `span{Y^j}` under `A` and brackets.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub dim: usize,
    /// Independent elements in the order they were found: the nonzero
    /// control vectors first, then images under `A` and brackets.
    pub generators: Vec<AlgebraVector>,
}

impl RankReport {
    pub fn satisfied(&self) -> bool {
        self.rank == self.dim
    }
}

/// Smallest `A`-invariant subalgebra containing the control vectors.
pub fn larc_check(sys: &LinearControlSystem) -> RankReport {
    let algebra = sys.algebra();
    let a = sys.derivation();
    let n = algebra.dim();
    let scale = sys
        .controls()
        .iter()
        .flat_map(|y| y.iter())
        .chain(a.iter())
        .chain(algebra.structure_constants())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut generators: Vec<Vec<f64>> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();

    let try_add =
        |v: Vec<f64>, generators: &mut Vec<Vec<f64>>, basis: &mut Vec<Vec<f64>>| -> bool {
            let mut candidate = basis.clone();
            candidate.push(v.clone());
            let new_basis = span_basis(n, &candidate, tol);
            if new_basis.len() > basis.len() {
                *basis = new_basis;
                generators.push(v);
                true
            } else {
                false
            }
        };

    for y in sys.controls() {
        try_add(y.as_slice().to_vec(), &mut generators, &mut basis);
    }
    let mut next = 0;
    while next < generators.len() && basis.len() < n {
        let v = generators[next].clone();
        let av: Vec<f64> = (a * DVector::from_column_slice(&v))
            .iter()
            .copied()
            .collect();
        try_add(av, &mut generators, &mut basis);
        let mut k = 0;
        while k < generators.len() {
            let w = generators[k].clone();
            try_add(algebra.bracket_slice(&v, &w), &mut generators, &mut basis);
            k += 1;
        }
        next += 1;
    }
    RankReport {
        rank: basis.len(),
        dim: n,
        generators: generators.into_iter().map(DVector::from_vec).collect(),
    }
}

/// Determinant, regularity and kernel of a derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub det: f64,
    pub regular: bool,
    /// Orthonormal basis of `ker A`; `exp ker A` is the singularity set of
    /// the drift.
    pub kernel: Vec<AlgebraVector>,
}

pub fn regularity(a: &DMatrix<f64>) -> RegularityReport {
    let n = a.nrows();
    let det = a.clone().lu().determinant();
    let svd = a.clone().svd(false, true);
    let norm = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let threshold = 1e-10 * norm;
    let v_t = svd.v_t.expect("requested V^T");
    let kernel: Vec<AlgebraVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    debug_assert!(kernel.len() <= n);
    RegularityReport {
        det,
        regular: kernel.is_empty(),
        kernel,
    }
}

/// Times `2kπ/μ` in `[0, window]` for every pure imaginary eigenvalue pair
/// `±iμ` of `A`, always including `0`. Sorted ascending.
pub fn exceptional_set(a: &DMatrix<f64>, window: f64) -> Vec<f64> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-10 * scale;
    let mut mus: Vec<f64> = a
        .complex_eigenvalues()
        .iter()
        .filter(|l| l.re.abs() < tol && l.im.abs() > tol)
        .map(|l| l.im.abs())
        .collect();
    mus.sort_by(f64::total_cmp);
    mus.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());

    let mut times = vec![0.0];
    for mu in mus {
        let period = 2.0 * PI / mu;
        let mut k = 1;
        while k as f64 * period <= window * (1.0 + 1e-12) {
            times.push(k as f64 * period);
            k += 1;
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    times
}

/// `det(I − e^{SA})`; `f_S` is a diffeomorphism exactly when it is nonzero.
pub fn fixed_point_determinant(a: &DMatrix<f64>, s: f64) -> f64 {
    let n = a.nrows();
    (DMatrix::identity(n, n) - matrix_exponential(a, s))
        .lu()
        .determinant()
}

/// `f_S(x) = x · φ_S(x⁻¹)`.
pub fn f_s_map(algebra: &LieAlgebra, a: &DMatrix<f64>, s: f64, x: &GroupPoint) -> GroupPoint {
    let flowed = linear_flow(a, s, &algebra.invert(x));
    DVector::from_vec(algebra.multiply_slice(x.as_slice(), flowed.as_slice()))
}
