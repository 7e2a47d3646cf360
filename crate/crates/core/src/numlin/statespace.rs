use nalgebra::{Complex, DMatrix};

use super::eigen::is_hurwitz;
use super::lyapunov::solve_lyapunov;
use crate::error::{Error, Result};
use crate::scalar::{complexify, CMatrix, Real};

/// Continuous-time realization `ẋ = A x + B v`, `y = C x + D v`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

impl<T: Real> StateSpace<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n || d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::dim(format!(
                "state-space shapes A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(StateSpace { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (σI − A)⁻¹ B + D` at a complex frequency.
    pub fn transfer_at(&self, sigma: Complex<T>) -> Result<CMatrix<T>> {
        let n = self.order();
        let resolvent = CMatrix::<T>::identity(n, n) * sigma - complexify(&self.a);
        let x = resolvent
            .lu()
            .solve(&complexify(&self.b))
            .ok_or_else(|| Error::numerical("frequency coincides with an eigenvalue"))?;
        Ok(complexify(&self.c) * x + complexify(&self.d))
    }

    /// Observability Gramian `Q_o` with `AᵀQ_o + Q_o A + CᵀC = 0`.
    pub fn observability_gramian(&self) -> Result<DMatrix<T>> {
        solve_lyapunov(&self.a, &(self.c.transpose() * &self.c))
    }
}

/// Squared H2 norm `trace(Bᵀ Q_o B)` of a stable, strictly proper system.
pub fn h2_norm_squared<T: Real>(ss: &StateSpace<T>) -> Result<T> {
    if ss.d.iter().any(|v| *v != T::zero()) {
        return Err(Error::contract("H2 norm needs zero feedthrough"));
    }
    if !is_hurwitz(&ss.a, T::zero())? {
        return Err(Error::contract("H2 norm of an unstable system"));
    }
    let q = ss.observability_gramian()?;
    let val = (ss.b.transpose() * q * &ss.b).trace();
    Ok(val.max(T::zero()))
}
