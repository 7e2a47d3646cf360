//! Incidence-algebra arithmetic on local variables.
//!
//! A local variable is an `s × s` matrix whose column `i` is the prediction
//! of a global vector held at subsystem `i`; entry `(j, i)` is the prediction
//! of component `j` at subsystem `i`. Its downstream part (the free
//! variables) are the entries with `i ≼ j`, which in matrix coordinates is
//! the same lower-triangular pattern as incidence-algebra membership.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::poset::Poset;
use crate::scalar::{from_integer, Real};

/// Absolute tolerance for pattern-membership checks.
pub const PATTERN_TOL: f64 = 1e-12;

/// Local gains `F(i)`, each acting on the coordinates `↓i` (listed in
/// linear-extension order).
#[derive(Clone, Debug, PartialEq)]
pub struct GainFamily<T: Real> {
    supports: Vec<Vec<usize>>,
    gains: Vec<DMatrix<T>>,
}

impl<T: Real> GainFamily<T> {
    pub fn new(poset: &Poset, gains: Vec<DMatrix<T>>) -> Result<Self> {
        if gains.len() != poset.len() {
            return Err(Error::dim(format!(
                "expected {} local gains, got {}",
                poset.len(),
                gains.len()
            )));
        }
        let supports: Vec<Vec<usize>> = (0..poset.len()).map(|i| poset.down(i)).collect();
        for (i, (g, s)) in gains.iter().zip(&supports).enumerate() {
            if g.shape() != (s.len(), s.len()) {
                return Err(Error::dim(format!(
                    "gain F({}) must be {}x{} on ↓{}, got {}x{}",
                    poset.label(i),
                    s.len(),
                    s.len(),
                    poset.label(i),
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        Ok(GainFamily { supports, gains })
    }

    /// All-zero gains.
    pub fn zeros(poset: &Poset) -> Self {
        let gains = (0..poset.len())
            .map(|i| {
                let k = poset.down(i).len();
                DMatrix::zeros(k, k)
            })
            .collect();
        Self::new(poset, gains).expect("shapes follow the poset")
    }

    /// Gains `F(i) = I` on every `↓i`.
    pub fn identity(poset: &Poset) -> Self {
        let gains = (0..poset.len())
            .map(|i| {
                let k = poset.down(i).len();
                DMatrix::identity(k, k)
            })
            .collect();
        Self::new(poset, gains).expect("shapes follow the poset")
    }

    /// Recovers the gain family from zero-padded `s × s` matrices, checking
    /// they vanish outside `↓i × ↓i`.
    pub fn from_embedded(poset: &Poset, full: &[DMatrix<T>]) -> Result<Self> {
        let s = poset.len();
        let tol = T::lit(PATTERN_TOL);
        let mut gains = Vec::with_capacity(s);
        for (i, f) in full.iter().enumerate() {
            if f.shape() != (s, s) {
                return Err(Error::dim(format!("embedded gain {i} must be {s}x{s}")));
            }
            for r in 0..s {
                for c in 0..s {
                    let inside = poset.leq(i, r) && poset.leq(i, c);
                    if !inside && f[(r, c)].abs() > tol {
                        return Err(Error::contract(format!(
                            "embedded gain for `{}` is non-zero outside ↓{}",
                            poset.label(i),
                            poset.label(i)
                        )));
                    }
                }
            }
            let support = poset.down(i);
            gains.push(f.select_rows(&support).select_columns(&support));
        }
        Self::new(poset, gains)
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// `F(i)` on `↓i`.
    pub fn gain(&self, i: usize) -> &DMatrix<T> {
        &self.gains[i]
    }

    pub fn gain_mut(&mut self, i: usize) -> &mut DMatrix<T> {
        &mut self.gains[i]
    }

    pub fn gains(&self) -> &[DMatrix<T>] {
        &self.gains
    }

    /// Index set `↓i` on which `F(i)` acts.
    pub fn support(&self, i: usize) -> &[usize] {
        &self.supports[i]
    }

    /// Zero-padded `F̂(i)`.
    pub fn embedded(&self, i: usize) -> DMatrix<T> {
        let s = self.len();
        scatter(&self.gains[i], &self.supports[i], s)
    }
}

/// Embeds a `|S| × |S|` matrix indexed by `subset` into an `s × s` zero matrix.
pub fn embed<T: Real>(poset: &Poset, subset: &[usize], k: &DMatrix<T>) -> Result<DMatrix<T>> {
    if k.shape() != (subset.len(), subset.len()) {
        return Err(Error::dim(format!(
            "block is {}x{} but the index set has {} elements",
            k.nrows(),
            k.ncols(),
            subset.len()
        )));
    }
    for (a, &i) in subset.iter().enumerate() {
        if i >= poset.len() {
            return Err(Error::UnknownElement(format!("#{i}")));
        }
        if subset[..a].contains(&i) {
            return Err(Error::contract(format!("index set repeats `{}`", poset.label(i))));
        }
    }
    Ok(scatter(k, subset, poset.len()))
}

fn scatter<T: Real>(k: &DMatrix<T>, subset: &[usize], s: usize) -> DMatrix<T> {
    let mut out = DMatrix::zeros(s, s);
    for (a, &r) in subset.iter().enumerate() {
        for (b, &c) in subset.iter().enumerate() {
            out[(r, c)] = k[(a, b)];
        }
    }
    out
}

/// Incidence-algebra operations over a fixed poset, with `ζ` and `μ`
/// precomputed in the working scalar type.
#[derive(Clone, Debug)]
pub struct IncidenceAlgebra<'p, T: Real> {
    poset: &'p Poset,
    zeta: DMatrix<T>,
    mu: DMatrix<T>,
}

impl<'p, T: Real> IncidenceAlgebra<'p, T> {
    pub fn new(poset: &'p Poset) -> Self {
        IncidenceAlgebra {
            poset,
            zeta: from_integer(&poset.zeta_matrix::<i64>()),
            mu: from_integer(&poset.mobius_matrix::<i64>()),
        }
    }

    pub fn poset(&self) -> &'p Poset {
        self.poset
    }

    pub fn size(&self) -> usize {
        self.poset.len()
    }

    pub fn zeta(&self) -> &DMatrix<T> {
        &self.zeta
    }

    pub fn mu(&self) -> &DMatrix<T> {
        &self.mu
    }

    /// `(row, col)` pairs of an `s × s` matrix.
    fn cells(&self) -> impl Iterator<Item = (usize, usize)> {
        let s = self.size();
        (0..s).flat_map(move |r| (0..s).map(move |c| (r, c)))
    }

    fn check_square(&self, m: &DMatrix<T>) -> Result<()> {
        let s = self.size();
        if m.shape() != (s, s) {
            return Err(Error::dim(format!("expected {s}x{s}, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(())
    }

    /// `M[(i, j)] = 0` whenever `j ⋠ i`, to within [`PATTERN_TOL`].
    pub fn is_member(&self, m: &DMatrix<T>) -> bool {
        let tol = T::lit(PATTERN_TOL);
        m.shape() == (self.size(), self.size())
            && self.cells().all(|(r, c)| self.poset.in_incidence_pattern(r, c) || m[(r, c)].abs() <= tol)
    }

    /// Local variable supported on its downstream (free-variable) entries.
    pub fn is_downstream_supported(&self, x: &DMatrix<T>) -> bool {
        let tol = T::lit(PATTERN_TOL);
        x.shape() == (self.size(), self.size())
            && self.cells().all(|(j, i)| self.poset.in_downstream_pattern(i, j) || x[(j, i)].abs() <= tol)
    }

    /// `Π_d`: keeps the prediction of `x_j` at subsystem `i` when `i ≼ j`.
    pub fn project_d(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut out = x.clone();
        for (j, i) in self.cells() {
            if !self.poset.in_downstream_pattern(i, j) {
                out[(j, i)] = T::zero();
            }
        }
        out
    }

    /// `Π_uo = I − Π_d`: upstream and off-stream predictions.
    pub fn project_uo(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut out = x.clone();
        for (j, i) in self.cells() {
            if self.poset.in_downstream_pattern(i, j) {
                out[(j, i)] = T::zero();
            }
        }
        out
    }

    /// `ζ(X) = Π_d(X ζᵀ)`: column `i` aggregates the columns of `↑i`.
    pub fn zeta_local(&self, x: &DMatrix<T>) -> DMatrix<T> {
        self.project_d(&(x * self.zeta.transpose()))
    }

    /// `μ(X) = Π_d(X μᵀ)`: the differential improvement of each
    /// subsystem's prediction over its upstream.
    pub fn mu_local(&self, x: &DMatrix<T>) -> DMatrix<T> {
        self.project_d(&(x * self.mu.transpose()))
    }

    /// `(F∘X)^i = F̂(i) X^i`.
    pub fn local_product(&self, gains: &GainFamily<T>, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_square(x)?;
        if gains.len() != self.size() {
            return Err(Error::dim("gain family does not match the poset"));
        }
        let s = self.size();
        let mut out = DMatrix::zeros(s, s);
        for i in 0..s {
            let support = gains.support(i);
            let g = gains.gain(i);
            for (a, &r) in support.iter().enumerate() {
                let mut acc = T::zero();
                for (b, &c) in support.iter().enumerate() {
                    acc += g[(a, b)] * x[(c, i)];
                }
                out[(r, i)] = acc;
            }
        }
        Ok(out)
    }

    /// Completes a local variable from its free variables: `X = μ(X_d) ζᵀ`.
    pub fn complete_from_downstream(&self, x_d: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_square(x_d)?;
        if !self.is_downstream_supported(x_d) {
            return Err(Error::contract(
                "free variables must vanish on upstream and off-stream entries",
            ));
        }
        Ok(self.mu_local(x_d) * self.zeta.transpose())
    }

    /// Diagonal of a local variable, i.e. the global variable it is consistent with.
    pub fn global_of(&self, x: &DMatrix<T>) -> Vec<T> {
        (0..self.size()).map(|i| x[(i, i)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diamond() -> Poset {
        Poset::from_cover_relations(
            &["1", "2", "3", "4"],
            &[("1", "2"), ("1", "3"), ("2", "4"), ("3", "4")],
        )
        .unwrap()
    }

    /// Free variables of the diamond local state with distinct values so
    /// that each expected entry pins one symbol:
    /// x1=1, x2(1)=2, x3(1)=3, x4(1)=5, x2=7, x4(2)=11, x3=13, x4(3)=17, x4=19.
    fn diamond_xd() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                2.0, 7.0, 0.0, 0.0, //
                3.0, 0.0, 13.0, 0.0, //
                5.0, 11.0, 17.0, 19.0,
            ],
        )
    }

    #[test]
    fn membership() {
        let p = Poset::from_cover_relations(&["1", "2", "3"], &[("1", "2"), ("1", "3")]).unwrap();
        let alg = IncidenceAlgebra::<f64>::new(&p);
        assert!(alg.is_member(&from_integer(&p.zeta_matrix::<i64>())));
        let anti = Poset::antichain(2);
        let alg2 = IncidenceAlgebra::<f64>::new(&anti);
        assert!(!alg2.is_member(&DMatrix::from_element(2, 2, 1.0)));
    }

    #[test]
    fn projections_of_the_diamond_local_state() {
        let p = diamond();
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let x = alg.complete_from_downstream(&diamond_xd()).unwrap();
        let xd = alg.project_d(&x);
        let xuo = alg.project_uo(&x);
        assert_eq!(xd, diamond_xd());
        // X_uo = [0 x1 x1 x1; 0 0 x2(1) x2; 0 x3(1) 0 x3; 0 0 0 0]
        let expected_uo = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 1.0, 1.0, //
                0.0, 0.0, 2.0, 7.0, //
                0.0, 3.0, 0.0, 13.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        );
        assert_relative_eq!(xuo, expected_uo, epsilon = 1e-14);
        assert_eq!(&xd + &xuo, x);
    }

    #[test]
    fn projections_are_complementary_and_idempotent() {
        let p = Poset::antichain(3);
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let m = DMatrix::from_fn(3, 3, |r, c| (r * 3 + c) as f64 + 1.0);
        let d = alg.project_d(&m);
        assert_eq!(d, DMatrix::from_diagonal(&m.diagonal()));
        assert_eq!(alg.project_uo(&m), &m - &d);
        assert_eq!(alg.project_d(&d), d);
    }

    #[test]
    fn mu_of_the_diamond_local_state() {
        let p = diamond();
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let x = alg.complete_from_downstream(&diamond_xd()).unwrap();
        let mu = alg.mu_local(&x);
        // Column 2: x2 − x2(1), x4(2) − x4(1); column 4: x4 − x4(3) − x4(2) + x4(1).
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                2.0, 5.0, 0.0, 0.0, //
                3.0, 0.0, 10.0, 0.0, //
                5.0, 6.0, 12.0, 19.0 - 17.0 - 11.0 + 5.0,
            ],
        );
        assert_relative_eq!(mu, expected, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_local_variable_on_an_antichain_is_fixed_by_mu() {
        let p = Poset::antichain(3);
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.5, -2.0, 4.0]));
        assert_eq!(alg.mu_local(&x), x);
        assert_eq!(alg.complete_from_downstream(&x).unwrap(), x);
    }

    #[test]
    fn completion_on_a_chain_copies_upstream_states() {
        let p = Poset::chain(3);
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let xd = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 2.0, 4.0, 0.0, 3.0, 5.0, 6.0]);
        let x = alg.complete_from_downstream(&xd).unwrap();
        assert_relative_eq!(x[(0, 2)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[(1, 2)], 4.0, epsilon = 1e-14);
        assert_relative_eq!(x[(0, 1)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn completion_rejects_upstream_support() {
        let p = Poset::chain(2);
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(alg.complete_from_downstream(&bad), Err(Error::Contract(_))));
    }

    #[test]
    fn local_product_matches_columnwise_gains() {
        let p = diamond();
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let gains: Vec<DMatrix<f64>> = (0..4)
            .map(|i| {
                let k = p.down(i).len();
                DMatrix::from_fn(k, k, |r, c| (10 * i + 3 * r + c) as f64 * 0.1 + 0.2)
            })
            .collect();
        let f = GainFamily::new(&p, gains).unwrap();
        let x = alg.complete_from_downstream(&diamond_xd()).unwrap();
        let y = alg.local_product(&f, &x).unwrap();
        for i in 0..4 {
            let col = f.embedded(i) * x.column(i);
            assert_relative_eq!(y.column(i).into_owned(), col, epsilon = 1e-12);
        }
        // Column 2 only reads rows {2, 4} of X.
        let mut masked = x.clone();
        masked[(0, 1)] = 1e6;
        masked[(2, 1)] = -1e6;
        assert_eq!(alg.local_product(&f, &masked).unwrap().column(1), y.column(1));
        assert!(alg.is_member(&alg.local_product(&f, &diamond_xd()).unwrap()));
    }

    #[test]
    fn identity_gains_project_each_column() {
        let p = diamond();
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let xd = diamond_xd();
        assert_eq!(alg.local_product(&GainFamily::identity(&p), &xd).unwrap(), xd);
    }

    #[test]
    fn singleton_local_product_is_scalar() {
        let p = Poset::chain(1);
        let alg = IncidenceAlgebra::<f64>::new(&p);
        let f = GainFamily::new(&p, vec![DMatrix::from_element(1, 1, -3.0)]).unwrap();
        let y = alg.local_product(&f, &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(y[(0, 0)], -6.0);
    }

    #[test]
    fn embedding() {
        let p = diamond();
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let down2 = p.down(1);
        assert_eq!(down2, vec![1, 3]);
        let e = embed(&p, &down2, &k).unwrap();
        assert_eq!(e[(1, 1)], 1.0);
        assert_eq!(e[(1, 3)], 2.0);
        assert_eq!(e[(3, 1)], 3.0);
        assert_eq!(e[(3, 3)], 4.0);
        assert_eq!(e.iter().filter(|v| **v != 0.0).count(), 4);

        let full = DMatrix::from_fn(4, 4, |r, c| (r + c) as f64);
        assert_eq!(embed(&p, &[0, 1, 2, 3], &full).unwrap(), full);
        assert_eq!(embed::<f64>(&p, &[], &DMatrix::zeros(0, 0)).unwrap(), DMatrix::zeros(4, 4));
        assert!(matches!(
            embed(&p, &[0, 9], &k),
            Err(Error::UnknownElement(_))
        ));
    }

    #[test]
    fn gain_family_from_embedded_round_trip() {
        let p = diamond();
        let f = GainFamily::<f64>::identity(&p);
        let full: Vec<_> = (0..4).map(|i| f.embedded(i)).collect();
        assert_eq!(GainFamily::from_embedded(&p, &full).unwrap(), f);
        let mut bad = full.clone();
        bad[3][(0, 0)] = 1.0;
        assert!(GainFamily::from_embedded(&p, &bad).is_err());
        assert!(GainFamily::new(&p, vec![DMatrix::<f64>::zeros(1, 1); 4]).is_err());
    }
}
