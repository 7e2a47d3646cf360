use nalgebra::{Complex, ComplexField, DMatrix, Schur};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues from the real Schur form. Triangular input is read off the
/// diagonal.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    if !m.is_square() {
        return Err(Error::dim(format!("eigenvalues of a {}x{} matrix", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    if is_triangular(m) {
        return Ok(m.diagonal().iter().map(|&d| Complex::new(d, T::zero())).collect());
    }
    // Removing the mean of the diagonal keeps near-multiples of the identity
    // from stalling the iteration.
    let c = m.trace() / T::from_usize(n).expect("dimension representable");
    let shifted = m - DMatrix::identity(n, n) * c;
    if let Some(schur) = Schur::try_new(shifted, T::machine_eps(), 100 * n) {
        return Ok(schur.complex_eigenvalues().iter().map(|z| z + Complex::new(c, T::zero())).collect());
    }
    let schur = Schur::try_new(m.clone(), T::machine_eps(), 1000 * n)
        .ok_or_else(|| Error::numerical(format!("QR iteration did not converge for n = {n}")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn is_triangular<T: Real>(m: &DMatrix<T>) -> bool {
    let n = m.nrows();
    let zero = |r: usize, c: usize| m[(r, c)] == T::zero();
    (0..n).all(|c| (0..c).all(|r| zero(r, c))) || (0..n).all(|c| (c + 1..n).all(|r| zero(r, c)))
}

/// Largest real part of the spectrum; `-∞` for an empty matrix.
pub fn spectral_abscissa<T: Real>(m: &DMatrix<T>) -> Result<T> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(T::min_value().expect("real field has a minimum"), |a, z| a.max(z.re)))
}

pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> Result<T> {
    Ok(eigenvalues(m)?.iter().fold(T::zero(), |a, z| a.max(z.modulus())))
}

/// `true` iff every eigenvalue has real part below `-margin`.
pub fn is_hurwitz<T: Real>(m: &DMatrix<T>, margin: T) -> Result<bool> {
    Ok(eigenvalues(m)?.iter().all(|z| z.re < -margin))
}

/// Sorts eigenvalues by real then imaginary part.
pub fn sort_spectrum<T: Real>(spec: &mut [Complex<T>]) {
    spec.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Largest distance in a greedy nearest-neighbour pairing of two spectra
/// after sorting. Returns `None` when the multisets differ in size.
pub fn spectrum_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Option<T> {
    if a.len() != b.len() {
        return None;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    sort_spectrum(&mut a);
    sort_spectrum(&mut b);
    let mut used = vec![false; b.len()];
    let mut worst = T::zero();
    for z in &a {
        let (best, dist) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, w)| (k, (z - w).modulus()))
            .fold((usize::MAX, T::max_value().expect("bounded")), |acc, cur| {
                if cur.1 < acc.1 {
                    cur
                } else {
                    acc
                }
            });
        used[best] = true;
        worst = worst.max(dist);
    }
    Some(worst)
}
