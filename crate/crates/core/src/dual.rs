//! Forward-mode automatic differentiation with fixed-size dual numbers.
//!
//! [`DualN`] carries a value together with N partial derivatives. Nesting
//! (`DualN<DualN<f64, A>, B>`) yields exact mixed second derivatives, which is
//! how the equinoctial dynamics obtain the Jacobian of costate rates that are
//! themselves gradients of the Hamiltonian.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic interface shared by `f64` and dual numbers so that dynamics
/// expressions can be written once and differentiated by instantiation.
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Real part, stripped of all derivative information. Used for branching.
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    /// Integer power by repeated multiplication (exact derivative chain).
    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

/// Dual number with N simultaneous derivative directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualN<T, const N: usize> {
    pub re: T,
    pub eps: [T; N],
}

impl<T: Scalar, const N: usize> DualN<T, N> {
    pub fn constant(re: T) -> Self {
        Self {
            re,
            eps: [T::zero(); N],
        }
    }

    /// Value seeded as the `dir`-th independent variable.
    pub fn variable(re: T, dir: usize) -> Self {
        let mut eps = [T::zero(); N];
        eps[dir] = T::one();
        Self { re, eps }
    }

    fn map_eps(&self, f: impl Fn(T) -> T) -> [T; N] {
        std::array::from_fn(|i| f(self.eps[i]))
    }
}

impl<T: Scalar, const N: usize> Add for DualN<T, N> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self {
            re: self.re + rhs.re,
            eps: std::array::from_fn(|i| self.eps[i] + rhs.eps[i]),
        }
    }
}

impl<T: Scalar, const N: usize> Sub for DualN<T, N> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self {
            re: self.re - rhs.re,
            eps: std::array::from_fn(|i| self.eps[i] - rhs.eps[i]),
        }
    }
}

impl<T: Scalar, const N: usize> Mul for DualN<T, N> {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        Self {
            re: self.re * rhs.re,
            eps: std::array::from_fn(|i| self.re * rhs.eps[i] + self.eps[i] * rhs.re),
        }
    }
}

impl<T: Scalar, const N: usize> Div for DualN<T, N> {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        let q = self.re / rhs.re;
        Self {
            re: q,
            eps: std::array::from_fn(|i| (self.eps[i] - q * rhs.eps[i]) / rhs.re),
        }
    }
}

impl<T: Scalar, const N: usize> Neg for DualN<T, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            eps: self.map_eps(|e| -e),
        }
    }
}

impl<T: Scalar, const N: usize> Scalar for DualN<T, N> {
    fn from_f64(x: f64) -> Self {
        Self::constant(T::from_f64(x))
    }

    fn value(&self) -> f64 {
        self.re.value()
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        let half = T::from_f64(0.5);
        Self {
            re: s,
            eps: self.map_eps(|e| half * e / s),
        }
    }

    fn sin(self) -> Self {
        let c = self.re.cos();
        Self {
            re: self.re.sin(),
            eps: self.map_eps(|e| c * e),
        }
    }

    fn cos(self) -> Self {
        let s = self.re.sin();
        Self {
            re: self.re.cos(),
            eps: self.map_eps(|e| -s * e),
        }
    }

    fn tanh(self) -> Self {
        let t = self.re.tanh();
        let d = T::one() - t * t;
        Self {
            re: t,
            eps: self.map_eps(|e| d * e),
        }
    }
}
