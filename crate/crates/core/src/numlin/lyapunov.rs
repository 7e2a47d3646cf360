use nalgebra::{DMatrix, Schur};

use super::eigen::is_hurwitz;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves `Aᵀ P + P A + Q = 0` for Hurwitz `A` and symmetric `Q`.
///
/// Bartels–Stewart: `A = U T Uᵀ` (real Schur), then the quasi-triangular
/// equation `Tᵀ Y + Y T = −Uᵀ Q U` is solved block by block and
/// `P = U Y Uᵀ`. The result is symmetrized.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_inputs(a, q)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let schur = Schur::try_new(a.clone(), T::machine_eps(), 100 * n)
        .ok_or_else(|| Error::numerical("Schur decomposition did not converge"))?;
    let (u, t) = schur.unpack();
    let c = -(u.transpose() * q * &u);
    let y = solve_quasi_triangular(&t, &c)?;
    Ok(symmetrize(&(&u * y * u.transpose())))
}

/// Reference solver through the `n²`-dimensional Kronecker system
/// `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = −vec(Q)`.
pub fn solve_lyapunov_kronecker<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_inputs(a, q)?;
    let n = a.nrows();
    let at = a.transpose();
    let eye = DMatrix::<T>::identity(n, n);
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numerical("Kronecker Lyapunov system is singular"))?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

/// `‖Aᵀ P + P A + Q‖_F / (2‖A‖_F ‖P‖_F + ‖Q‖_F)`.
pub fn lyapunov_residual<T: Real>(a: &DMatrix<T>, p: &DMatrix<T>, q: &DMatrix<T>) -> T {
    let r = a.transpose() * p + p * a + q;
    let scale = T::lit(2.0) * a.norm() * p.norm() + q.norm();
    if scale > T::zero() {
        r.norm() / scale
    } else {
        r.norm()
    }
}

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

fn check_inputs<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::dim(format!(
            "Lyapunov needs square A and matching Q, got {:?} and {:?}",
            a.shape(),
            q.shape()
        )));
    }
    let asym = (q - q.transpose()).norm();
    if asym > T::tol(1e-10) * (T::one() + q.norm()) {
        return Err(Error::contract("Lyapunov right-hand side is not symmetric"));
    }
    if !is_hurwitz(a, T::zero())? {
        return Err(Error::contract("Lyapunov coefficient matrix is not Hurwitz"));
    }
    Ok(())
}

/// Diagonal blocks of a real Schur form as `(start, size)`.
fn schur_blocks<T: Real>(t: &DMatrix<T>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let two = i + 1 < n
            && t[(i + 1, i)].abs()
                > T::machine_eps() * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs() + T::one());
        let size = if two { 2 } else { 1 };
        blocks.push((i, size));
        i += size;
    }
    blocks
}

/// Solves `Tᵀ Y + Y T = C` for quasi-upper-triangular `T`.
fn solve_quasi_triangular<T: Real>(t: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = t.nrows();
    let blocks = schur_blocks(t);
    let mut y = DMatrix::<T>::zeros(n, n);
    for &(ri, bi) in &blocks {
        for &(cj, bj) in &blocks {
            // rhs = C_IJ − Σ_{K<I} T_KIᵀ Y_KJ − Σ_{L<J} Y_IL T_LJ
            let mut rhs = c.view((ri, cj), (bi, bj)).into_owned();
            if ri > 0 {
                let t_ki = t.view((0, ri), (ri, bi));
                let y_kj = y.view((0, cj), (ri, bj));
                rhs -= t_ki.transpose() * y_kj;
            }
            if cj > 0 {
                let y_il = y.view((ri, 0), (bi, cj));
                let t_lj = t.view((0, cj), (cj, bj));
                rhs -= y_il * t_lj;
            }
            let t_ii = t.view((ri, ri), (bi, bi)).into_owned();
            let t_jj = t.view((cj, cj), (bj, bj)).into_owned();
            let op = DMatrix::<T>::identity(bj, bj).kronecker(&t_ii.transpose())
                + t_jj.transpose().kronecker(&DMatrix::<T>::identity(bi, bi));
            let sol = op
                .lu()
                .solve(&DMatrix::from_column_slice(bi * bj, 1, rhs.as_slice()))
                .ok_or_else(|| Error::numerical("singular Sylvester block in Bartels–Stewart"))?;
            y.view_mut((ri, cj), (bi, bj))
                .copy_from(&DMatrix::from_column_slice(bi, bj, sol.as_slice()));
        }
    }
    Ok(y)
}
