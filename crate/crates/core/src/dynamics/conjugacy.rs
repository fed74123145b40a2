//! Numerical check that a map `ψ` intertwines two control systems:
//! `Jψ(x)·X_A(x) = X_B(ψ(x))` and likewise for every control field.

use nalgebra::{DMatrix, DVector};

use crate::algebra::GroupPoint;
use crate::dynamics::system::ControlSystem;

type MapFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFn = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A smooth map together with its Jacobian.
pub struct PolynomialMap {
    map: MapFn,
    jacobian: JacobianFn,
}

impl PolynomialMap {
    pub fn new(map: MapFn, jacobian: JacobianFn) -> Self {
        Self { map, jacobian }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(
            Box::new(|x| x.to_vec()),
            Box::new(move |_| DMatrix::identity(dim, dim)),
        )
    }

    /// `(x, y, z) ↦ (x, y, z − xy/6)`, taking the first Heisenberg example to
    /// its normal form.
    pub fn example1_normal_form() -> Self {
        Self::new(
            Box::new(|p| vec![p[0], p[1], p[2] - p[0] * p[1] / 6.0]),
            Box::new(|p| {
                nalgebra::dmatrix![
                    1.0, 0.0, 0.0;
                    0.0, 1.0, 0.0;
                    -p[1] / 6.0, -p[0] / 6.0, 1.0
                ]
            }),
        )
    }

    pub fn apply(&self, x: &GroupPoint) -> GroupPoint {
        DVector::from_vec((self.map)(x.as_slice()))
    }

    pub fn jacobian(&self, x: &GroupPoint) -> DMatrix<f64> {
        (self.jacobian)(x.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyReport {
    pub max_drift_residual: f64,
    pub max_control_residual: f64,
    pub tolerance: f64,
    /// False when the systems disagree on dimension or control count.
    pub compatible: bool,
}

impl ConjugacyReport {
    pub fn conjugate(&self) -> bool {
        self.compatible
            && self.max_drift_residual <= self.tolerance
            && self.max_control_residual <= self.tolerance
    }
}

pub const CONJUGACY_TOL: f64 = 1e-8;

pub fn verify_conjugacy<A, B>(
    psi: &PolynomialMap,
    sys_a: &A,
    sys_b: &B,
    samples: &[GroupPoint],
) -> ConjugacyReport
where
    A: ControlSystem + ?Sized,
    B: ControlSystem + ?Sized,
{
    let compatible = sys_a.dim() == sys_b.dim() && sys_a.num_controls() == sys_b.num_controls();
    let mut report = ConjugacyReport {
        max_drift_residual: 0.0,
        max_control_residual: 0.0,
        tolerance: CONJUGACY_TOL,
        compatible,
    };
    if !compatible {
        return report;
    }
    let residual = |jac: &DMatrix<f64>, fa: Vec<f64>, fb: Vec<f64>| {
        let pushed = jac * DVector::from_vec(fa);
        (pushed - DVector::from_vec(fb)).amax()
    };
    for x in samples {
        let jac = psi.jacobian(x);
        let y = psi.apply(x);
        report.max_drift_residual = report.max_drift_residual.max(residual(
            &jac,
            sys_a.drift(x.as_slice()),
            sys_b.drift(y.as_slice()),
        ));
        for j in 0..sys_a.num_controls() {
            report.max_control_residual = report.max_control_residual.max(residual(
                &jac,
                sys_a.control_field(j, x.as_slice()),
                sys_b.control_field(j, y.as_slice()),
            ));
        }
    }
    report
}
