//! Scalar abstraction shared by the numerical layers.
//!
//! Everything above the order-theoretic layer is generic over [`Real`], which
//! is implemented for `f32` and `f64`. The order-theoretic matrices (zeta and
//! Möbius) are generic over any ring with `num_traits::Num`, so they can be
//! produced exactly as integers or rationals.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real field used by the numerical kernels.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn machine_eps() -> Self {
        Self::default_epsilon()
    }

    /// A tolerance stated for `f64`, floored at a hundred ulps of this type.
    fn tol(x: f64) -> Self {
        Self::lit(x).max(Self::lit(100.0) * Self::machine_eps())
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Matrix<T> = DMatrix<T>;
pub type Vector<T> = DVector<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Maximum absolute entry, zero for empty matrices.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

pub fn max_abs_complex<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.modulus()))
}

/// Lifts a real matrix into the complex field.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(|v| Complex::new(v, T::zero()))
}

/// Converts an integer-valued matrix into the real field.
pub fn from_integer<T: Real>(m: &DMatrix<i64>) -> DMatrix<T> {
    m.map(|v| T::from_i64(v).expect("small integer representable"))
}
