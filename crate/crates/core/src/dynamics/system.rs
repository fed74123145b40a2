use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;

use crate::algebra::{AlgebraVector, GroupPoint, LieAlgebra};
use crate::dynamics::integrate::{endpoint, endpoint_direct, identity_endpoint};
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;

/// Axis-aligned control range `Ω = Π_j [ρ_j, ν_j]` with `ρ_j < 0 < ν_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRange {
    bounds: Vec<(f64, f64)>,
}

impl ControlRange {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidOmega(
                "at least one control channel is required".into(),
            ));
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < 0.0 && 0.0 < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidOmega(format!(
                    "channel {} has range [{lo}, {hi}], which must contain 0 in its interior",
                    j + 1
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// `[−r, r]^m`.
    pub fn symmetric(m: usize, r: f64) -> Result<Self> {
        Self::new(vec![(-r, r); m])
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn num_channels(&self) -> usize {
        self.bounds.len()
    }

    /// Exact membership test (no tolerance).
    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.bounds.len()
            && u.iter()
                .zip(&self.bounds)
                .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }

    pub fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.len(),
                found: u.len(),
            });
        }
        if self.contains(u) {
            Ok(())
        } else {
            Err(Error::ControlOutOfRange { value: u.to_vec() })
        }
    }

    /// All `2^m` corners of the box.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let m = self.bounds.len();
        (0..1usize << m)
            .map(|mask| {
                DVector::from_fn(m, |j, _| {
                    let (lo, hi) = self.bounds[j];
                    if mask >> j & 1 == 1 {
                        hi
                    } else {
                        lo
                    }
                })
            })
            .collect()
    }

    /// Tensor lattice with `levels` values per channel: `lo`, `0`, `hi` and
    /// evenly spaced values in between on each side of `0`. `levels` is
    /// rounded up to an odd number ≥ 3.
    pub fn lattice(&self, levels: usize) -> Vec<DVector<f64>> {
        let per_side = (levels.max(3) - 1).div_ceil(2);
        let axis: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let mut vals: Vec<f64> = (1..=per_side)
                    .rev()
                    .map(|i| lo * i as f64 / per_side as f64)
                    .collect();
                vals.push(0.0);
                vals.extend((1..=per_side).map(|i| hi * i as f64 / per_side as f64));
                vals
            })
            .collect();
        let mut out = vec![Vec::new()];
        for vals in &axis {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(DVector::from_vec).collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.bounds.len(),
            self.bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi)),
        )
    }
}

/// Piecewise-constant control: consecutive `(duration, value)` segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseControl {
    segments: Vec<(f64, DVector<f64>)>,
}

impl PiecewiseControl {
    pub fn new(segments: Vec<(f64, DVector<f64>)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidControl(
                "a control needs at least one segment".into(),
            ));
        }
        let m = segments[0].1.len();
        for (d, v) in &segments {
            if !(*d >= 0.0) || !d.is_finite() {
                return Err(Error::InvalidControl(format!(
                    "segment duration {d} is not a finite non-negative number"
                )));
            }
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(value: DVector<f64>, duration: f64) -> Result<Self> {
        Self::new(vec![(duration, value)])
    }

    pub fn segments(&self) -> &[(f64, DVector<f64>)] {
        &self.segments
    }

    pub fn num_channels(&self) -> usize {
        self.segments[0].1.len()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|(d, _)| d).sum()
    }

    /// Value on the segment containing `t` (right-continuous; the last value
    /// is returned for `t` past the end).
    pub fn value_at(&self, t: f64) -> &DVector<f64> {
        let mut start = 0.0;
        for (d, v) in &self.segments {
            if t < start + d {
                return v;
            }
            start += d;
        }
        &self.segments.last().expect("non-empty").1
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &PiecewiseControl) -> Result<Self> {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        Self::new(segments)
    }

    pub fn check_range(&self, omega: &ControlRange) -> Result<()> {
        self.segments
            .iter()
            .try_for_each(|(_, v)| omega.check(v.as_slice()))
    }
}

/// A control-affine system `ẋ = X(x) + Σ_j u_j Y^j(x)` on `R^n`.
pub trait ControlSystem: Sync {
    fn dim(&self) -> usize;

    fn omega(&self) -> &ControlRange;

    fn num_controls(&self) -> usize {
        self.omega().num_channels()
    }

    fn drift(&self, x: &[f64]) -> Vec<f64>;

    fn control_field(&self, j: usize, x: &[f64]) -> Vec<f64>;

    /// Unchecked evaluation of the full field.
    fn field(&self, u: &[f64], x: &[f64]) -> Vec<f64> {
        let mut f = self.drift(x);
        for (j, &uj) in u.iter().enumerate() {
            if uj != 0.0 {
                for (fi, gi) in f.iter_mut().zip(self.control_field(j, x)) {
                    *fi += uj * gi;
                }
            }
        }
        f
    }

    /// `X(x) + Σ u_j Y^j(x)`; fails when `u ∉ Ω`.
    fn vector_field(&self, u: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        self.omega().check(u.as_slice())?;
        Ok(DVector::from_vec(self.field(u.as_slice(), x.as_slice())))
    }

    /// `φ(horizon, x0, u)` by RK4 with step `h`.
    fn endpoint_from(
        &self,
        x0: &GroupPoint,
        u: &PiecewiseControl,
        horizon: f64,
        h: f64,
    ) -> Result<GroupPoint> {
        endpoint_direct(self, x0, u, horizon, h)
    }

    /// Time-`tau` map of the constant control `u`.
    fn constant_control_map<'a>(
        &'a self,
        u: &DVector<f64>,
        tau: f64,
        h: f64,
    ) -> Result<StepMap<'a>> {
        let control = PiecewiseControl::constant(u.clone(), tau)?;
        control.check_range(self.omega())?;
        Ok(Box::new(move |x: &[f64]| {
            endpoint_direct(self, &DVector::from_column_slice(x), &control, tau, h)
                .expect("arguments checked")
                .as_slice()
                .to_vec()
        }))
    }
}

/// A map `x ↦ φ(τ, x, u)` for a fixed control.
pub type StepMap<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync + 'a>;

/// Linear control system on a simply connected nilpotent group: drift given
/// by a derivation `A`, right-invariant control fields `Y^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearControlSystem {
    algebra: LieAlgebra,
    derivation: DMatrix<f64>,
    controls: Vec<AlgebraVector>,
    omega: ControlRange,
}

impl LinearControlSystem {
    pub fn new(
        algebra: LieAlgebra,
        derivation: DMatrix<f64>,
        controls: Vec<AlgebraVector>,
        omega: ControlRange,
    ) -> Result<Self> {
        let n = algebra.dim();
        if derivation.nrows() != n || derivation.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: derivation.nrows(),
            });
        }
        let report = algebra.validate_derivation(&derivation);
        if !report.is_valid() {
            return Err(Error::NotADerivation {
                max_violation: report.max_violation,
            });
        }
        if controls.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one control vector is required".into(),
            ));
        }
        for y in &controls {
            algebra.check_len(y.len())?;
        }
        if controls.len() != omega.num_channels() {
            return Err(Error::DimensionMismatch {
                expected: controls.len(),
                found: omega.num_channels(),
            });
        }
        if algebra.step() > crate::algebra::MAX_STEP {
            return Err(Error::UnsupportedStep(algebra.step()));
        }
        Ok(Self {
            algebra,
            derivation,
            controls,
            omega,
        })
    }

    /// `ẋ = y, ẏ = u, ż = ½xu` on the Heisenberg group.
    pub fn example1(omega: ControlRange) -> Result<Self> {
        Self::new(
            LieAlgebra::heisenberg(),
            dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 0.0],
            vec![dvector![0.0, 1.0, 0.0]],
            omega,
        )
    }

    /// `ẋ = −y, ẏ = x + u, ż = −½xu` on the Heisenberg group with `[e1, e2] = −e3`.
    pub fn example2(omega: ControlRange) -> Result<Self> {
        Self::new(
            LieAlgebra::heisenberg_opposite(),
            dmatrix![0.0, -1.0, 0.0; 1.0, 0.0, 0.0; 0.0, 0.0, 0.0],
            vec![dvector![0.0, 1.0, 0.0]],
            omega,
        )
    }

    /// Regular system on the Heisenberg group: `A = diag(1, 1, 2)` with
    /// control vectors `e1`, `e2` and `Ω = [−1, 1]²`.
    pub fn regular_heisenberg() -> Self {
        Self::new(
            LieAlgebra::heisenberg(),
            DMatrix::from_diagonal(&dvector![1.0, 1.0, 2.0]),
            vec![dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]],
            ControlRange::symmetric(2, 1.0).expect("valid range"),
        )
        .expect("regular heisenberg system is valid")
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn derivation(&self) -> &DMatrix<f64> {
        &self.derivation
    }

    pub fn controls(&self) -> &[AlgebraVector] {
        &self.controls
    }

    /// Same system with a different control range.
    pub fn with_omega(&self, omega: ControlRange) -> Result<Self> {
        Self::new(
            self.algebra.clone(),
            self.derivation.clone(),
            self.controls.clone(),
            omega,
        )
    }

    /// `φ_S(x) = exp(e^{SA} X)`.
    pub fn linear_flow(&self, s: f64, x: &GroupPoint) -> GroupPoint {
        linear_flow(&self.derivation, s, x)
    }
}

/// Flow of the linear vector field with derivation `A`, in exponential
/// coordinates: `x ↦ e^{SA} x`.
pub fn linear_flow(a: &DMatrix<f64>, s: f64, x: &GroupPoint) -> GroupPoint {
    if s == 0.0 {
        return x.clone();
    }
    matrix_exponential(a, s) * x
}

impl ControlSystem for LinearControlSystem {
    fn dim(&self) -> usize {
        self.algebra.dim()
    }

    fn omega(&self) -> &ControlRange {
        &self.omega
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.derivation[(i, j)] * x[j]).sum())
            .collect()
    }

    fn control_field(&self, j: usize, x: &[f64]) -> Vec<f64> {
        self.algebra
            .right_invariant_slice(self.controls[j].as_slice(), x)
    }

    fn endpoint_from(
        &self,
        x0: &GroupPoint,
        u: &PiecewiseControl,
        horizon: f64,
        h: f64,
    ) -> Result<GroupPoint> {
        endpoint(self, x0, u, horizon, h)
    }

    fn constant_control_map<'a>(
        &'a self,
        u: &DVector<f64>,
        tau: f64,
        h: f64,
    ) -> Result<StepMap<'a>> {
        let control = PiecewiseControl::constant(u.clone(), tau)?;
        let y = identity_endpoint(self, &control, tau, h)?;
        let flow = matrix_exponential(&self.derivation, tau);
        Ok(Box::new(move |x: &[f64]| {
            let fx = &flow * DVector::from_column_slice(x);
            self.algebra.multiply_slice(y.as_slice(), fx.as_slice())
        }))
    }
}

type Field = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Control-affine system given by explicit field closures. Used for
/// systems that are not linear control systems in their coordinates, such
/// as the normal form of the first Heisenberg example.
pub struct FieldSystem {
    dim: usize,
    omega: ControlRange,
    drift: Field,
    fields: Vec<Field>,
}

impl FieldSystem {
    pub fn new(dim: usize, omega: ControlRange, drift: Field, fields: Vec<Field>) -> Result<Self> {
        if fields.len() != omega.num_channels() {
            return Err(Error::DimensionMismatch {
                expected: fields.len(),
                found: omega.num_channels(),
            });
        }
        Ok(Self {
            dim,
            omega,
            drift,
            fields,
        })
    }

    /// `ẋ = y, ẏ = u, ż = (2xu − y²)/6`: the first example after the change
    /// of coordinates `(x, y, z) ↦ (x, y, z − xy/6)`.
    pub fn example1_conjugated(omega: ControlRange) -> Result<Self> {
        Self::new(
            3,
            omega,
            Box::new(|p: &[f64]| vec![p[1], 0.0, -p[1] * p[1] / 6.0]),
            vec![Box::new(|p: &[f64]| vec![0.0, 1.0, p[0] / 3.0])],
        )
    }
}

impl std::fmt::Debug for FieldSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSystem")
            .field("dim", &self.dim)
            .field("omega", &self.omega)
            .finish_non_exhaustive()
    }
}

impl ControlSystem for FieldSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn omega(&self) -> &ControlRange {
        &self.omega
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    fn control_field(&self, j: usize, x: &[f64]) -> Vec<f64> {
        (self.fields[j])(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> ControlRange {
        ControlRange::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn omega_must_contain_zero() {
        assert!(ControlRange::interval(0.0, 1.0).is_err());
        assert!(ControlRange::interval(-1.0, -0.5).is_err());
        assert!(ControlRange::new(vec![]).is_err());
    }

    #[test]
    fn lattice_and_vertices() {
        let omega = ControlRange::new(vec![(-1.0, 2.0), (-3.0, 1.0)]).unwrap();
        assert_eq!(omega.vertices().len(), 4);
        let l = omega.lattice(3);
        assert_eq!(l.len(), 9);
        assert!(l.contains(&dvector![0.0, 0.0]));
        assert!(l.contains(&dvector![2.0, -3.0]));
        let l5 = ControlRange::interval(-1.0, 1.0).unwrap().lattice(5);
        let vals: Vec<f64> = l5.iter().map(|v| v[0]).collect();
        assert_eq!(vals, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn example_fields() {
        let s1 = LinearControlSystem::example1(unit()).unwrap();
        let p = dvector![0.7, -1.1, 2.0];
        assert_eq!(
            s1.vector_field(&dvector![1.0], &p).unwrap(),
            dvector![-1.1, 1.0, 0.35]
        );
        assert_eq!(
            s1.vector_field(&dvector![0.0], &DVector::zeros(3)).unwrap(),
            DVector::zeros(3)
        );

        let s2 = LinearControlSystem::example2(unit()).unwrap();
        let u0 = 0.4;
        let f = s2.vector_field(&dvector![u0], &p).unwrap();
        let expected = dvector![1.1, 0.7 + u0, -0.5 * 0.7 * u0];
        assert!((f - expected).amax() < 1e-15);
    }

    #[test]
    fn control_outside_omega_is_rejected() {
        let s1 = LinearControlSystem::example1(unit()).unwrap();
        let err = s1
            .vector_field(&dvector![1.5], &DVector::zeros(3))
            .unwrap_err();
        assert_eq!(err, Error::ControlOutOfRange { value: vec![1.5] });
    }

    #[test]
    fn non_derivation_is_rejected() {
        let err = LinearControlSystem::new(
            LieAlgebra::heisenberg(),
            DMatrix::identity(3, 3),
            vec![dvector![0.0, 1.0, 0.0]],
            unit(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotADerivation { .. }));
    }

    #[test]
    fn linear_flow_examples() {
        let s1 = LinearControlSystem::example1(unit()).unwrap();
        let x = s1.linear_flow(1.0, &dvector![0.0, 1.0, 0.0]);
        assert!((x - dvector![1.0, 1.0, 0.0]).amax() < 1e-15);
        let p = dvector![1.0, 2.0, 3.0];
        assert_eq!(s1.linear_flow(0.0, &p), p);
        let s2 = LinearControlSystem::example2(unit()).unwrap();
        assert!((s2.linear_flow(2.0 * PI, &p) - &p).amax() < 1e-13);
    }

    #[test]
    fn piecewise_control_lookup() {
        let u = PiecewiseControl::new(vec![(0.5, dvector![1.0]), (1.0, dvector![-1.0])]).unwrap();
        assert_eq!(u.total_duration(), 1.5);
        assert_eq!(u.value_at(0.2)[0], 1.0);
        assert_eq!(u.value_at(0.5)[0], -1.0);
        assert_eq!(u.value_at(9.0)[0], -1.0);
        assert!(u.check_range(&unit()).is_ok());
        assert!(PiecewiseControl::new(vec![(-1.0, dvector![0.0])]).is_err());
    }
}
