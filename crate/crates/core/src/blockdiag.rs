//! Vectorized local operators and the block-diagonal form of the lifted plant.
//!
//! `vec` stacks columns, so entry `(j, i)` of an `s × s` matrix lands at
//! `i·s + j` and `vec(N X Mᵀ) = (M ⊗ N) vec(X)`.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numlin::{eigenvalues, StateSpace};
use crate::poset::Poset;
use crate::scalar::{complexify, max_abs_complex, CMatrix, Real};
use crate::synthesis::PosetSystem;

pub const BLOCK_TOL: f64 = 1e-10;

pub fn vec<T: Real>(x: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(x.as_slice())
}

pub fn unvec<T: Real>(v: &DVector<T>, s: usize) -> Result<DMatrix<T>> {
    if v.len() != s * s {
        return Err(Error::dim(format!("vector of length {} is not {s}²", v.len())));
    }
    Ok(DMatrix::from_column_slice(s, s, v.as_slice()))
}

/// Diagonal selector of the d-pattern coordinates.
pub fn d_selector<T: Real>(p: &Poset) -> DMatrix<T> {
    let s = p.len();
    DMatrix::from_fn(s * s, s * s, |r, c| {
        let (i, j) = (r / s, r % s);
        if r == c && p.leq(i, j) {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// `ζ̄ = Π_d(ζ ⊗ I)`, `μ̄ = Π_d(μ ⊗ I)` and `Θ = (ζ ⊗ I) Π_d (μ ⊗ I)`.
#[derive(Clone, Debug)]
pub struct VectorOperators<T: Real> {
    pub zeta_bar: DMatrix<T>,
    pub mu_bar: DMatrix<T>,
    pub theta: DMatrix<T>,
    pub pi_d: DMatrix<T>,
}

pub fn build_vector_operators<T: Real>(p: &Poset) -> VectorOperators<T> {
    let s = p.len();
    let id = DMatrix::<i64>::identity(s, s);
    let zk = p.zeta_matrix::<i64>().kronecker(&id);
    let mk = p.mobius_matrix::<i64>().kronecker(&id);
    let pi_d = d_selector::<T>(p);
    let to_t = |m: &DMatrix<i64>| m.map(|v| T::from_i64(v).expect("small integer"));
    let (zk, mk) = (to_t(&zk), to_t(&mk));
    VectorOperators {
        zeta_bar: &pi_d * &zk,
        mu_bar: &pi_d * &mk,
        theta: &zk * &pi_d * &mk,
        pi_d,
    }
}

/// Realization of `G_vec = (I ⊗ G) Θ` with `G = (σI − A)⁻¹ B`: state
/// dimension `s²`, output the full vectorized local state.
pub fn lift_plant<T: Real>(sys: &PosetSystem<T>) -> Result<StateSpace<T>> {
    let s = sys.states();
    let ops = build_vector_operators::<T>(sys.poset());
    let id = DMatrix::<T>::identity(s, s);
    StateSpace::new(
        id.kronecker(&sys.a),
        id.kronecker(&sys.b) * &ops.theta,
        DMatrix::identity(s * s, s * s),
        DMatrix::zeros(s * s, s * s),
    )
}

/// `(I ⊗ G(σ)) Θ` evaluated directly.
pub fn g_vec_formula<T: Real>(sys: &PosetSystem<T>, sigma: Complex<T>) -> Result<CMatrix<T>> {
    let s = sys.states();
    let g = plant_at(sys, sigma)?;
    let ops = build_vector_operators::<T>(sys.poset());
    Ok(CMatrix::<T>::identity(s, s).kronecker(&g) * complexify(&ops.theta))
}

/// `G(σ) = (σI − A)⁻¹ B`.
pub fn plant_at<T: Real>(sys: &PosetSystem<T>, sigma: Complex<T>) -> Result<CMatrix<T>> {
    let s = sys.states();
    StateSpace::new(sys.a.clone(), sys.b.clone(), DMatrix::identity(s, s), DMatrix::zeros(s, s))?.transfer_at(sigma)
}

/// Largest Frobenius norm among the off-diagonal `s × s` blocks.
pub fn max_off_diagonal_block<T: Real>(m: &CMatrix<T>, s: usize) -> T {
    let mut worst = T::zero();
    for a in 0..s {
        for b in (0..s).filter(|&b| b != a) {
            worst = worst.max(m.view((a * s, b * s), (s, s)).norm());
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct FrequencyCheck<T: Real> {
    pub sigma: Complex<T>,
    pub max_off_diagonal: T,
    /// `max |μ̄ G_vec ζ̄ − Π_d (I ⊗ G) Π_d|`.
    pub identity_error: T,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct BlockDiagonalReport<T: Real> {
    pub checks: Vec<FrequencyCheck<T>>,
    pub tolerance: T,
    pub passed: bool,
}

/// Evaluates `μ̄ G_vec(σ) ζ̄` at each frequency.
pub fn check_block_diagonal<T: Real>(sys: &PosetSystem<T>, frequencies: &[Complex<T>]) -> Result<BlockDiagonalReport<T>> {
    let s = sys.states();
    let ops = build_vector_operators::<T>(sys.poset());
    let lifted = lift_plant(sys)?;
    let (mu_bar, zeta_bar, pi_d) = (complexify(&ops.mu_bar), complexify(&ops.zeta_bar), complexify(&ops.pi_d));
    let tolerance = T::lit(BLOCK_TOL);
    let mut checks = Vec::with_capacity(frequencies.len());
    for &sigma in frequencies {
        let g_vec = lifted.transfer_at(sigma)?;
        let product = &mu_bar * g_vec * &zeta_bar;
        let expected = &pi_d * CMatrix::<T>::identity(s, s).kronecker(&plant_at(sys, sigma)?) * &pi_d;
        let max_off_diagonal = max_off_diagonal_block(&product, s);
        let identity_error = max_abs_complex(&(product - expected));
        let passed = max_off_diagonal < tolerance && identity_error < tolerance;
        checks.push(FrequencyCheck { sigma, max_off_diagonal, identity_error, passed });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(BlockDiagonalReport { checks, tolerance, passed })
}

/// Random frequencies with modulus in `[0.5, 5]`, at least `1e-3` away from
/// the spectrum of `A`.
pub fn sample_frequencies<T: Real, R: Rng>(a: &DMatrix<T>, count: usize, rng: &mut R) -> Result<Vec<Complex<T>>> {
    let spectrum = eigenvalues(a)?;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r: f64 = rng.gen_range(0.5..5.0);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let sigma = Complex::new(T::lit(r * theta.cos()), T::lit(r * theta.sin()));
        if spectrum.iter().all(|z| (z - sigma).modulus() > T::lit(1e-3)) {
            out.push(sigma);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_system(p: Poset, rng: &mut ChaCha8Rng) -> PosetSystem<f64> {
        let s = p.len();
        let mut member = |diag: f64| {
            DMatrix::from_fn(s, s, |r, c| {
                if r == c {
                    diag + rng.gen_range(-1.0..1.0)
                } else if p.leq(c, r) {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
        };
        let a = member(-1.0);
        let b = member(1.0);
        PosetSystem::new(p, a, b, DMatrix::identity(s, s), DMatrix::zeros(s, s)).unwrap()
    }

    #[test]
    fn kronecker_vec_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let mut m = || DMatrix::<f64>::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let (n, x, mm) = (m(), m(), m());
            let lhs = vec(&(&n * &x * mm.transpose()));
            let rhs = mm.kronecker(&n) * vec(&x);
            assert!((lhs - rhs).amax() < 1e-14);
        }
        assert_eq!(unvec(&vec(&DMatrix::<f64>::identity(2, 2)), 2).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn two_chain_operators() {
        let ops = build_vector_operators::<f64>(&Poset::chain(2));
        #[rustfmt::skip]
        let zeta_bar = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
        ]);
        #[rustfmt::skip]
        let mu_bar = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 0.0, 1.0,
        ]);
        assert_eq!(ops.zeta_bar, zeta_bar);
        assert_eq!(ops.mu_bar, mu_bar);
    }

    #[test]
    fn operators_invert_on_the_pattern() {
        let p = Poset::from_cover_relations(&["a", "b", "c", "d"], &[("a", "b"), ("a", "c"), ("b", "d")]).unwrap();
        let ops = build_vector_operators::<f64>(&p);
        assert_eq!(&ops.zeta_bar * &ops.mu_bar, ops.pi_d);
        assert_eq!(&ops.mu_bar * &ops.zeta_bar, ops.pi_d);
        let anti = build_vector_operators::<f64>(&Poset::antichain(3));
        assert_eq!(anti.zeta_bar, anti.pi_d);
        assert_eq!(anti.mu_bar, anti.pi_d);
    }

    #[test]
    fn theta_completes_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = Poset::from_cover_relations(&["1", "2", "3", "4"], &[("1", "2"), ("1", "3"), ("2", "4"), ("3", "4")]).unwrap();
        let alg = crate::incidence::IncidenceAlgebra::<f64>::new(&p);
        let ops = build_vector_operators::<f64>(&p);
        let u_d = alg.project_d(&DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0)));
        let completed = alg.complete_from_downstream(&u_d).unwrap();
        assert!((&ops.theta * vec(&u_d) - vec(&completed)).amax() < 1e-14);
    }

    #[test]
    fn lifted_plant_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = Poset::from_cover_relations(&["1", "2", "3"], &[("1", "2"), ("1", "3")]).unwrap();
        let sys = random_system(p, &mut rng);
        let lifted = lift_plant(&sys).unwrap();
        assert_eq!(lifted.order(), 9);
        for sigma in sample_frequencies(&sys.a, 5, &mut rng).unwrap() {
            let diff = lifted.transfer_at(sigma).unwrap() - g_vec_formula(&sys, sigma).unwrap();
            assert!(max_abs_complex(&diff) < 1e-10);
        }
    }

    #[test]
    fn single_element_lift_is_the_plant() {
        let sys = PosetSystem::<f64>::new(
            Poset::chain(1),
            DMatrix::from_element(1, 1, -2.0),
            DMatrix::from_element(1, 1, 3.0),
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let sigma = Complex::new(0.0, 1.0);
        let g = g_vec_formula(&sys, sigma).unwrap();
        assert!((g[(0, 0)] - Complex::new(3.0, 0.0) / Complex::new(2.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn two_chain_g_vec_on_the_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = random_system(Poset::chain(2), &mut rng);
        let sigma = Complex::new(0.3, 1.1);
        let g = plant_at(&sys, sigma).unwrap();
        let pi_d = complexify(&d_selector::<f64>(sys.poset()));
        let gv = &pi_d * g_vec_formula(&sys, sigma).unwrap();
        let z = Complex::new(0.0, 0.0);
        #[rustfmt::skip]
        let expected = CMatrix::from_row_slice(4, 4, &[
            g[(0, 0)], z, z, z,
            g[(1, 0)], g[(1, 1)], z, z,
            z, z, z, z,
            g[(1, 0)], z, z, g[(1, 1)],
        ]);
        assert!(max_abs_complex(&(gv - expected)) < 1e-14);
    }

    #[test]
    fn block_diagonal_on_random_posets() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let posets = [
            Poset::chain(3),
            Poset::antichain(3),
            Poset::from_cover_relations(&["1", "2", "3", "4"], &[("1", "2"), ("1", "3"), ("2", "4"), ("3", "4")]).unwrap(),
        ];
        for p in posets {
            let sys = random_system(p, &mut rng);
            let freqs = sample_frequencies(&sys.a, 10, &mut rng).unwrap();
            let rep = check_block_diagonal(&sys, &freqs).unwrap();
            assert!(rep.passed, "{:?}", rep.checks);
        }
    }
}
