//! Nilpotent Lie algebras and their simply connected groups in exponential
//! coordinates of the first kind.
//!
//! Structure constants describe the bracket of right-invariant vector fields,
//! `[e_i, e_j] = Σ_k c[i][j][k] e_k`. With that convention the group law in
//! the exponential chart is the Baker–Campbell–Hausdorff series of the
//! *opposite* algebra, `x · y = Z(y, x)`, where
//!
//! ```text
//! Z(X, Y) = X + Y + ½[X,Y] + 1/12 [X,[X,Y]] − 1/12 [Y,[X,Y]] − 1/24 [Y,[X,[X,Y]]] + …
//! ```
//!
//! For the Heisenberg algebra `[e1, e2] = e3` this gives the familiar product
//! `(x1+x2, y1+y2, z1+z2 + ½(x2 y1 − x1 y2))`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{self, Dual, Scalar};

/// Highest nilpotency step for which the group law is implemented.
pub const MAX_STEP: usize = 4;

/// Element of the Lie algebra, in the chosen basis.
pub type AlgebraVector = DVector<f64>;

/// Point of the group in exponential coordinates; the identity is `0`.
pub type GroupPoint = DVector<f64>;

const RANK_TOL: f64 = 1e-10;

/// Structure constants of a nilpotent Lie algebra together with its
/// declared nilpotency step.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    step: usize,
    structure: Vec<f64>,
    nonzero: Vec<(usize, usize, usize, f64)>,
    /// `(i, j, k, c)` with `i < j`, present when the constants are exactly
    /// antisymmetric. Makes `[x, x] = 0` hold exactly.
    pairs: Option<Vec<(usize, usize, usize, f64)>>,
}

impl LieAlgebra {
    /// Builds an algebra and rejects it unless [`LieAlgebra::validate`] passes.
    pub fn new(dim: usize, step: usize, structure: Vec<f64>) -> Result<Self> {
        let algebra = Self::new_unchecked(dim, step, structure)?;
        let report = algebra.validate();
        if report.is_valid() {
            Ok(algebra)
        } else {
            Err(Error::InvalidAlgebra(report.summary()))
        }
    }

    /// Builds an algebra without checking antisymmetry, Jacobi or nilpotency.
    /// Only the array shape is checked.
    pub fn new_unchecked(dim: usize, step: usize, structure: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidAlgebra("dimension must be positive".into()));
        }
        if step == 0 {
            return Err(Error::InvalidAlgebra(
                "nilpotency step must be positive".into(),
            ));
        }
        if structure.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                found: structure.len(),
            });
        }
        let mut nonzero = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let c = structure[(i * dim + j) * dim + k];
                    if c != 0.0 {
                        nonzero.push((i, j, k, c));
                    }
                }
            }
        }
        let antisymmetric = nonzero
            .iter()
            .all(|&(i, j, k, c)| structure[(j * dim + i) * dim + k] == -c);
        let pairs = antisymmetric.then(|| {
            nonzero
                .iter()
                .copied()
                .filter(|&(i, j, _, _)| i < j)
                .collect()
        });
        Ok(Self {
            dim,
            step,
            structure,
            nonzero,
            pairs,
        })
    }

    /// Builds an algebra from `[e_i, e_j] = coeffs` entries (0-based). The
    /// antisymmetric partner `[e_j, e_i]` is filled in unless it is listed
    /// explicitly, in which case it is kept as given.
    pub fn from_brackets(
        dim: usize,
        step: usize,
        brackets: &[(usize, usize, Vec<f64>)],
    ) -> Result<Self> {
        let structure = Self::structure_from_brackets(dim, brackets)?;
        Self::new(dim, step, structure)
    }

    pub(crate) fn structure_from_brackets(
        dim: usize,
        brackets: &[(usize, usize, Vec<f64>)],
    ) -> Result<Vec<f64>> {
        let mut structure = vec![0.0; dim * dim * dim];
        let mut given = vec![false; dim * dim];
        for (i, j, coeffs) in brackets {
            if *i >= dim || *j >= dim {
                return Err(Error::InvalidAlgebra(format!(
                    "bracket index ({}, {}) out of range for dimension {dim}",
                    i + 1,
                    j + 1
                )));
            }
            if coeffs.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: coeffs.len(),
                });
            }
            given[i * dim + j] = true;
        }
        for (i, j, coeffs) in brackets {
            for (k, &c) in coeffs.iter().enumerate() {
                structure[(i * dim + j) * dim + k] = c;
                if !given[j * dim + i] {
                    structure[(j * dim + i) * dim + k] = -c;
                }
            }
        }
        Ok(structure)
    }

    /// Three-dimensional Heisenberg algebra, `[e1, e2] = e3`.
    pub fn heisenberg() -> Self {
        Self::from_brackets(3, 2, &[(0, 1, vec![0.0, 0.0, 1.0])])
            .expect("heisenberg algebra is valid")
    }

    /// Heisenberg algebra with the opposite orientation, `[e1, e2] = −e3`.
    /// Isomorphic to [`LieAlgebra::heisenberg`] through `z ↦ −z`.
    pub fn heisenberg_opposite() -> Self {
        Self::from_brackets(3, 2, &[(0, 1, vec![0.0, 0.0, -1.0])])
            .expect("heisenberg algebra is valid")
    }

    /// Four-dimensional Engel algebra, `[e1, e2] = e3`, `[e1, e3] = e4`.
    pub fn engel() -> Self {
        Self::from_brackets(
            4,
            3,
            &[
                (0, 1, vec![0.0, 0.0, 1.0, 0.0]),
                (0, 2, vec![0.0, 0.0, 0.0, 1.0]),
            ],
        )
        .expect("engel algebra is valid")
    }

    /// Standard filiform algebra of dimension `dim ≥ 3`:
    /// `[e1, e_i] = e_{i+1}` for `2 ≤ i < dim`. Its step is `dim − 1`.
    pub fn filiform(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidAlgebra(
                "filiform algebras need dim >= 3".into(),
            ));
        }
        let brackets: Vec<_> = (1..dim - 1)
            .map(|i| {
                let mut c = vec![0.0; dim];
                c[i + 1] = 1.0;
                (0, i, c)
            })
            .collect();
        Self::from_brackets(dim, dim - 1, &brackets)
    }

    pub fn abelian(dim: usize) -> Result<Self> {
        Self::new(dim, 1, vec![0.0; dim * dim * dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `c[i][j][k]`, 0-based.
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn structure_constants(&self) -> &[f64] {
        &self.structure
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: len,
            })
        }
    }

    pub(crate) fn bracket_slice<T: Scalar>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        match &self.pairs {
            Some(pairs) => {
                for &(i, j, k, c) in pairs {
                    out[k] = out[k] + T::from_f64(c) * (x[i] * y[j] - x[j] * y[i]);
                }
            }
            None => {
                for &(i, j, k, c) in &self.nonzero {
                    out[k] = out[k] + T::from_f64(c) * x[i] * y[j];
                }
            }
        }
        out
    }

    /// Lie bracket `[x, y]`.
    pub fn bracket(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(DVector::from_vec(
            self.bracket_slice(x.as_slice(), y.as_slice()),
        ))
    }

    fn check_step(&self) -> Result<()> {
        if self.step > MAX_STEP {
            Err(Error::UnsupportedStep(self.step))
        } else {
            Ok(())
        }
    }

    /// Truncated BCH series `Z(x, y)`; exact for algebras of step ≤ 4.
    pub(crate) fn bch_slice<T: Scalar>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let mut z: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a + b).collect();
        if self.step < 2 || self.nonzero.is_empty() {
            return z;
        }
        let xy = self.bracket_slice(x, y);
        axpy(&mut z, 0.5, &xy);
        if self.step < 3 {
            return z;
        }
        let x_xy = self.bracket_slice(x, &xy);
        let y_xy = self.bracket_slice(y, &xy);
        axpy(&mut z, 1.0 / 12.0, &x_xy);
        axpy(&mut z, -1.0 / 12.0, &y_xy);
        if self.step < 4 {
            return z;
        }
        let y_x_xy = self.bracket_slice(y, &x_xy);
        axpy(&mut z, -1.0 / 24.0, &y_x_xy);
        z
    }

    /// The BCH series `Z(x, y)` computed with the stored bracket.
    pub fn bch(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_step()?;
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(DVector::from_vec(
            self.bch_slice(x.as_slice(), y.as_slice()),
        ))
    }

    pub(crate) fn multiply_slice<T: Scalar>(&self, x: &[T], y: &[T]) -> Vec<T> {
        self.bch_slice(y, x)
    }

    /// Group product `x · y` in exponential coordinates.
    pub fn multiply(&self, x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint> {
        self.check_step()?;
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(DVector::from_vec(
            self.multiply_slice(x.as_slice(), y.as_slice()),
        ))
    }

    /// `exp(X)⁻¹ = exp(−X)`.
    pub fn invert(&self, x: &GroupPoint) -> GroupPoint {
        -x
    }

    /// Value at `x` of the right-invariant field generated by `y`, i.e.
    /// `d/dt|₀ (exp(tY) · x)`, evaluated with dual numbers.
    pub fn right_invariant_field(
        &self,
        y: &AlgebraVector,
        x: &GroupPoint,
    ) -> Result<AlgebraVector> {
        self.check_step()?;
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(DVector::from_vec(
            self.right_invariant_slice(y.as_slice(), x.as_slice()),
        ))
    }

    pub(crate) fn right_invariant_slice(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let zero = vec![0.0; self.dim];
        let ty = jet::seed(&zero, y);
        let xc = jet::constants(x);
        jet::tangent(&self.multiply_slice::<Dual>(&ty, &xc))
    }

    /// Runs the antisymmetry, Jacobi and nilpotency checks.
    pub fn validate(&self) -> AlgebraReport {
        let n = self.dim;
        let mut antisymmetry_violations = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.constant(i, j, k) != -self.constant(j, i, k) {
                        antisymmetry_violations.push((i, j, k));
                    }
                }
            }
        }

        let scale = self.structure.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let jacobi_tol = 1e-12 * (1.0 + scale * scale);
        let basis = |i: usize| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        };
        let mut jacobi_violations = Vec::new();
        let mut jacobi_max_violation = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (basis(i), basis(j), basis(k));
                    let t1 = self.bracket_slice(&a, &self.bracket_slice(&b, &c));
                    let t2 = self.bracket_slice(&b, &self.bracket_slice(&c, &a));
                    let t3 = self.bracket_slice(&c, &self.bracket_slice(&a, &b));
                    let v = (0..n)
                        .map(|l| (t1[l] + t2[l] + t3[l]).abs())
                        .fold(0.0, f64::max);
                    jacobi_max_violation = jacobi_max_violation.max(v);
                    if v > jacobi_tol {
                        jacobi_violations.push((i, j, k));
                    }
                }
            }
        }

        AlgebraReport {
            antisymmetry_violations,
            jacobi_violations,
            jacobi_max_violation,
            computed_step: self.lower_central_series().map(|dims| dims.len()),
            declared_step: self.step,
        }
    }

    /// Dimensions of `g_1 = n ⊋ g_2 = [n, n] ⊋ …` up to the last nonzero
    /// term, or `None` if the series stabilises at a nonzero subspace.
    pub fn lower_central_series(&self) -> Option<Vec<usize>> {
        let n = self.dim;
        let mut current: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        let c_scale = self.structure.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let tol = RANK_TOL * (1.0 + c_scale);
        let mut dims = vec![n];
        for _ in 0..n {
            let mut next = Vec::new();
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                for v in &current {
                    next.push(self.bracket_slice(&e, v));
                }
            }
            let basis = span_basis(n, &next, tol);
            if basis.is_empty() {
                return Some(dims);
            }
            if basis.len() == current.len() {
                return None;
            }
            dims.push(basis.len());
            current = basis;
        }
        None
    }

    /// Checks the Leibniz rule `A[e_i, e_j] = [A e_i, e_j] + [e_i, A e_j]` on
    /// every basis pair.
    pub fn validate_derivation(&self, a: &DMatrix<f64>) -> DerivationReport {
        let n = self.dim;
        if a.nrows() != n || a.ncols() != n {
            return DerivationReport {
                max_violation: f64::INFINITY,
                worst_pair: None,
                tolerance: 0.0,
            };
        }
        let a_scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let c_scale = self.structure.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let tolerance = 1e-12 * (1.0 + a_scale) * (1.0 + c_scale);
        let mut max_violation = 0.0f64;
        let mut worst_pair = None;
        for i in 0..n {
            for j in 0..n {
                let ei = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
                let ej = DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
                let lhs = a * DVector::from_vec(self.bracket_slice(ei.as_slice(), ej.as_slice()));
                let aei = a * &ei;
                let aej = a * &ej;
                let r1 = self.bracket_slice(aei.as_slice(), ej.as_slice());
                let r2 = self.bracket_slice(ei.as_slice(), aej.as_slice());
                let v = (0..n)
                    .map(|k| (lhs[k] - r1[k] - r2[k]).abs())
                    .fold(0.0, f64::max);
                if v > max_violation {
                    max_violation = v;
                    worst_pair = Some((i, j));
                }
            }
        }
        DerivationReport {
            max_violation,
            worst_pair,
            tolerance,
        }
    }
}

fn axpy<T: Scalar>(z: &mut [T], alpha: f64, x: &[T]) {
    let a = T::from_f64(alpha);
    for (zi, &xi) in z.iter_mut().zip(x) {
        *zi = *zi + a * xi;
    }
}

/// Orthonormal basis of the span of `vectors` (rank-revealing SVD); singular
/// values at or below `tol` count as zero.
pub(crate) fn span_basis(dim: usize, vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(i, _)| u.column(i).iter().copied().collect())
        .collect()
}

/// Outcome of [`LieAlgebra::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraReport {
    /// `(i, j, k)` with `c[i][j][k] != −c[j][i][k]` (exact comparison).
    pub antisymmetry_violations: Vec<(usize, usize, usize)>,
    pub jacobi_violations: Vec<(usize, usize, usize)>,
    pub jacobi_max_violation: f64,
    /// Length of the lower central series, `None` if not nilpotent.
    pub computed_step: Option<usize>,
    pub declared_step: usize,
}

impl AlgebraReport {
    pub fn is_valid(&self) -> bool {
        self.antisymmetry_violations.is_empty()
            && self.jacobi_violations.is_empty()
            && matches!(self.computed_step, Some(s) if s <= self.declared_step)
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if let Some(&(i, j, k)) = self.antisymmetry_violations.first() {
            parts.push(format!(
                "{} antisymmetry violation(s), first at c[{}][{}][{}]",
                self.antisymmetry_violations.len(),
                i + 1,
                j + 1,
                k + 1
            ));
        }
        if !self.jacobi_violations.is_empty() {
            parts.push(format!(
                "{} Jacobi violation(s), max {:e}",
                self.jacobi_violations.len(),
                self.jacobi_max_violation
            ));
        }
        match self.computed_step {
            None => parts.push("algebra is not nilpotent".into()),
            Some(s) if s > self.declared_step => parts.push(format!(
                "computed nilpotency step {s} exceeds declared step {}",
                self.declared_step
            )),
            _ => {}
        }
        if parts.is_empty() {
            "valid".into()
        } else {
            parts.join("; ")
        }
    }
}

/// Outcome of [`LieAlgebra::validate_derivation`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivationReport {
    pub max_violation: f64,
    /// Basis pair `(i, j)` attaining the maximum, 0-based.
    pub worst_pair: Option<(usize, usize)>,
    pub tolerance: f64,
}

impl DerivationReport {
    pub fn is_valid(&self) -> bool {
        self.max_violation <= self.tolerance
    }
}
