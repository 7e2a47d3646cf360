//! Continuous-time algebraic Riccati equation for the cost `‖C x + D u‖²`:
//!
//! `AᵀP + PA − (PB + CᵀD)(DᵀD)⁻¹(BᵀP + DᵀC) + CᵀC = 0`,
//! `K = −(DᵀD)⁻¹(BᵀP + DᵀC)`.
//!
//! The solver runs Newton–Kleinman iterations (one Lyapunov solve each). The
//! initial stabilizing gain comes from the stable invariant subspace of the
//! Hamiltonian, obtained with the matrix sign function. If that seed does not
//! stabilize, a Bass-type shifted Lyapunov gain is tried instead.

use nalgebra::DMatrix;

use super::eigen::{is_hurwitz, spectral_abscissa};
use super::lyapunov::{solve_lyapunov, symmetrize};
use crate::error::{Error, Result};
use crate::scalar::Real;

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_CAP: usize = 50;
/// Accepted relative residual after iteration.
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct CareSolution<T: Real> {
    /// Stabilizing solution, symmetric positive semidefinite.
    pub p: DMatrix<T>,
    /// Optimal state feedback `u = K x`.
    pub k: DMatrix<T>,
    pub iterations: usize,
    /// Relative residual, see [`care_residual`].
    pub residual: T,
}

struct Weights<T: Real> {
    r_inv: DMatrix<T>,
    s: DMatrix<T>,
    q: DMatrix<T>,
}

fn weights<T: Real>(c: &DMatrix<T>, d: &DMatrix<T>) -> Result<Weights<T>> {
    let r = d.transpose() * d;
    let m = r.nrows();
    let chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::contract("DᵀD is singular"))?;
    let l = chol.l();
    let (lo, hi) = l.diagonal().iter().fold((T::max_value().unwrap(), T::zero()), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if m > 0 && lo <= hi * T::lit(1e-7) {
        return Err(Error::contract("DᵀD is numerically singular"));
    }
    Ok(Weights {
        r_inv: symmetrize(&chol.inverse()),
        s: c.transpose() * d,
        q: c.transpose() * c,
    })
}

/// Relative residual
/// `‖Res‖_F / (‖CᵀC‖_F + 2‖A‖_F‖P‖_F + ‖(PB+S)R⁻¹(BᵀP+Sᵀ)‖_F)`.
pub fn care_residual<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
    p: &DMatrix<T>,
) -> Result<T> {
    let w = weights(c, d)?;
    Ok(residual_with(a, b, &w, p))
}

fn residual_with<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, w: &Weights<T>, p: &DMatrix<T>) -> T {
    let pbs = p * b + &w.s;
    let quad = &pbs * &w.r_inv * pbs.transpose();
    let res = a.transpose() * p + p * a - &quad + &w.q;
    let scale = w.q.norm() + T::lit(2.0) * a.norm() * p.norm() + quad.norm();
    if scale > T::zero() {
        res.norm() / scale
    } else {
        res.norm()
    }
}

fn gain_from<T: Real>(b: &DMatrix<T>, w: &Weights<T>, p: &DMatrix<T>) -> DMatrix<T> {
    -(&w.r_inv * (b.transpose() * p + w.s.transpose()))
}

pub fn solve_care<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    d: &DMatrix<T>,
) -> Result<CareSolution<T>> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || c.ncols() != n || d.ncols() != m || d.nrows() != c.nrows()
    {
        return Err(Error::dim(format!(
            "CARE shapes A {:?}, B {:?}, C {:?}, D {:?}",
            a.shape(),
            b.shape(),
            c.shape(),
            d.shape()
        )));
    }
    let w = weights(c, d)?;
    let mut k = initial_gain(a, b, &w)?;

    let mut p = DMatrix::zeros(n, n);
    let mut iterations = 0;
    let mut residual = T::max_value().unwrap();
    while iterations < NEWTON_CAP {
        iterations += 1;
        let closed = a + b * &k;
        let ck = c + d * &k;
        let zk = symmetrize(&(ck.transpose() * ck));
        let next = solve_lyapunov(&closed, &zk).map_err(|e| match e {
            Error::Contract(_) => Error::numerical("Newton–Kleinman iterate lost stability"),
            other => other,
        })?;
        let step = (&next - &p).norm();
        p = next;
        k = gain_from(b, &w, &p);
        residual = residual_with(a, b, &w, &p);
        if residual < T::tol(NEWTON_TOL) || step <= T::tol(1e-14) * (T::one() + p.norm()) {
            break;
        }
    }
    if residual > T::tol(CARE_RESIDUAL_TOL) {
        return Err(Error::numerical(format!(
            "Riccati residual {:.3e} after {iterations} Newton steps",
            residual.to_f64_lossy()
        )));
    }
    if !is_hurwitz(&(a + b * &k), T::zero())? {
        return Err(Error::contract("Riccati solution is not stabilizing"));
    }
    Ok(CareSolution { p, k, iterations, residual })
}

fn initial_gain<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, w: &Weights<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let m = b.ncols();
    if let Some(p) = hamiltonian_seed(a, b, w) {
        let k = gain_from(b, w, &p);
        if k.iter().all(|v| v.is_finite()) && is_hurwitz(&(a + b * &k), T::zero())? {
            return Ok(k);
        }
    }
    if is_hurwitz(a, T::zero())? {
        return Ok(DMatrix::zeros(m, n));
    }
    // Bass: (A + βI) Z + Z (A + βI)ᵀ = 2 B Bᵀ with −(A + βI) Hurwitz,
    // then K = −Bᵀ Z⁻¹.
    let beta = T::one() + a.norm() + spectral_abscissa(&(-a))?.max(T::zero());
    let shifted = -(a + DMatrix::identity(n, n) * beta).transpose();
    let rhs = (b * b.transpose()) * T::lit(2.0);
    let z = solve_lyapunov(&shifted, &rhs)?;
    let k = z
        .try_inverse()
        .map(|zi| -(b.transpose() * zi))
        .ok_or_else(|| Error::contract("(A, B) is not stabilizable by the shifted-Lyapunov seed"))?;
    if is_hurwitz(&(a + b * &k), T::zero())? {
        Ok(k)
    } else {
        Err(Error::contract("no stabilizing initial gain found"))
    }
}

/// Stabilizing Riccati solution from `sign(H)`, where
/// `H = [Ã, −B R⁻¹ Bᵀ; −Q̃, −Ãᵀ]` in the cross-term-free coordinates.
fn hamiltonian_seed<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, w: &Weights<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let at = a - b * &w.r_inv * w.s.transpose();
    let qt = symmetrize(&(&w.q - &w.s * &w.r_inv * w.s.transpose()));
    let g = b * &w.r_inv * b.transpose();
    let mut h = DMatrix::<T>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&at);
    h.view_mut((0, n), (n, n)).copy_from(&(-g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-qt));
    h.view_mut((n, n), (n, n)).copy_from(&(-at.transpose()));

    let sign = matrix_sign(h)?;
    let eye = DMatrix::<T>::identity(n, n);
    let mut lhs = DMatrix::<T>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&sign.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(sign.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::<T>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(sign.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-sign.view((n, 0), (n, n))));
    let p = lhs.svd(true, true).solve(&rhs, T::machine_eps()).ok()?;
    Some(symmetrize(&p))
}

/// Newton iteration for the matrix sign function with determinant scaling.
fn matrix_sign<T: Real>(mut z: DMatrix<T>) -> Option<DMatrix<T>> {
    let n = z.nrows();
    for _ in 0..100 {
        let lu = z.clone().lu();
        let inv = lu.try_inverse()?;
        let det = lu_det_abs(&z)?;
        let scale = if det > T::zero() && det.is_finite() {
            det.powf(T::one() / T::from_usize(n).unwrap())
        } else {
            T::one()
        };
        let next = (&z / scale + inv * scale) * T::lit(0.5);
        let change = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if !size.is_finite() {
            return None;
        }
        if change <= T::tol(1e-12) * size {
            return Some(z);
        }
    }
    None
}

/// `|det Z|` through the LU factors, accumulated in log space.
fn lu_det_abs<T: Real>(z: &DMatrix<T>) -> Option<T> {
    let lu = z.clone().lu();
    let u = lu.u();
    let mut log = T::zero();
    for v in u.diagonal().iter() {
        if *v == T::zero() {
            return None;
        }
        log += v.abs().ln();
    }
    Some(log.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_integrator() {
        // ẋ = u, cost x² + u²  →  P = 1, K = −1
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let c = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let d = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let sol = solve_care(&a, &b, &c, &d).unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.k[(0, 0)], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_closed_form() {
        // P = (a + √(a² + b²)) / b² with unit weights.
        for &(a, b) in &[(0.5f64, 1.0f64), (2.0, 0.3), (-1.5, 2.0)] {
            let sol = solve_care(
                &DMatrix::from_element(1, 1, a),
                &DMatrix::from_element(1, 1, b),
                &DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
                &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            )
            .unwrap();
            let expected = (a + (a * a + b * b).sqrt()) / (b * b);
            assert_relative_eq!(sol.p[(0, 0)], expected, max_relative = 1e-12);
            assert_relative_eq!(sol.k[(0, 0)], -b * expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn no_control_authority_with_stable_plant() {
        let c = 3.0;
        let sol = solve_care(
            &DMatrix::from_element(1, 1, -1.0),
            &DMatrix::from_element(1, 1, 0.0),
            &DMatrix::from_row_slice(2, 1, &[c, 0.0]),
            &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        assert_relative_eq!(sol.p[(0, 0)], c * c / 2.0, epsilon = 1e-12);
        assert_relative_eq!(sol.k[(0, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unstable_without_authority_fails() {
        let res = solve_care(
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::from_element(1, 1, 0.0),
            &DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        );
        assert!(res.is_err());
    }

    #[test]
    fn singular_input_weight() {
        let res = solve_care(
            &DMatrix::from_element(1, 1, -1.0),
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::from_element(1, 1, 0.0),
        );
        assert!(matches!(res, Err(Error::Contract(_))));
    }

    #[test]
    fn cross_term_matches_completed_square() {
        // With C = [1; 0], D = [0.5; 1] the cost is x² + (x/2 + u)²·... check residual only.
        let a = DMatrix::from_row_slice(2, 2, &[0.2, 1.0, -0.4, 0.1]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.3, -0.2]);
        let d = DMatrix::from_row_slice(3, 1, &[0.0, 0.5, 1.0]);
        let sol = solve_care(&a, &b, &c, &d).unwrap();
        assert!(sol.residual < 1e-10);
        assert!(is_hurwitz(&(&a + &b * &sol.k), 0.0).unwrap());
        assert!(sol.p.symmetric_eigenvalues().iter().all(|v| *v > -1e-12));
    }

    #[test]
    fn random_stabilizable_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let n = 3;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let b = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
            let mut c = DMatrix::zeros(n + 2, n);
            c.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
            let mut d = DMatrix::zeros(n + 2, 2);
            d.view_mut((n, 0), (2, 2)).copy_from(&DMatrix::identity(2, 2));
            let sol = solve_care(&a, &b, &c, &d).unwrap();
            assert!(care_residual(&a, &b, &c, &d, &sol.p).unwrap() < 1e-8);
            assert!(is_hurwitz(&(&a + &b * &sol.k), 0.0).unwrap());
        }
    }

    #[test]
    fn bass_seed_stabilizes_controllable_pairs() {
        let a = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let w = weights(
            &DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            &DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
        )
        .unwrap();
        let n = 2;
        let beta = 1.0 + a.norm() + spectral_abscissa(&(-&a)).unwrap().max(0.0);
        let shifted = -(&a + DMatrix::identity(n, n) * beta).transpose();
        let z = solve_lyapunov(&shifted, &((&b * b.transpose()) * 2.0)).unwrap();
        let k = -(b.transpose() * z.try_inverse().unwrap());
        assert!(is_hurwitz(&(&a + &b * &k), 0.0).unwrap());
        assert!(initial_gain(&a, &b, &w).is_ok());
    }
}
