//! First-order jets (dual numbers).
//!
//! The group law in exponential coordinates is a polynomial, so evaluating it
//! on `Dual` inputs yields exact directional derivatives. Right-invariant
//! fields and the Jacobian used by the Newton solver both go through here.

use std::ops::{Add, Mul, Neg, Sub};

/// Arithmetic needed to evaluate brackets and the BCH polynomial.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    pub const fn constant(re: f64) -> Self {
        Self { re, eps: 0.0 }
    }
}

impl Scalar for Dual {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

/// Seeds `point + t·direction` as a vector of jets.
pub fn seed(point: &[f64], direction: &[f64]) -> Vec<Dual> {
    point
        .iter()
        .zip(direction)
        .map(|(&p, &d)| Dual::new(p, d))
        .collect()
}

pub fn constants(point: &[f64]) -> Vec<Dual> {
    point.iter().map(|&p| Dual::constant(p)).collect()
}

pub fn tangent(v: &[Dual]) -> Vec<f64> {
    v.iter().map(|d| d.eps).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        // d/dt (t^2 + 3t) at t = 2 is 7
        let t = Dual::new(2.0, 1.0);
        let y = t * t + Dual::constant(3.0) * t;
        assert_eq!(y.re, 10.0);
        assert_eq!(y.eps, 7.0);
    }
}
