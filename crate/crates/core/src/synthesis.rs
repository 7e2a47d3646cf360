//! Poset-causal plants, decoupled optimal synthesis, closed-loop assembly and
//! the explicit controller.
//!
//! The closed loop is a linear system over the free variables `X_d`, one
//! coordinate per interval `(i, j)` with `i ≼ j` holding the prediction of
//! `x_j` at subsystem `i`. Coordinates are ordered by `i`, then `j`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::incidence::{GainFamily, IncidenceAlgebra};
use crate::numlin::{eigenvalues, is_hurwitz, solve_care, spectrum_distance, CareSolution, StateSpace};
use crate::poset::Poset;
use crate::scalar::Real;

/// Relative tolerance of the spectral match, scaled by `1 + ‖A_cl‖`.
pub const SEPARATION_TOL: f64 = 1e-8;

/// `ẋ = A x + w + B u`, `z = C x + D u`, with `A, B ∈ I(P)`.
#[derive(Clone, Debug)]
pub struct PosetSystem<T: Real> {
    poset: Poset,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

impl<T: Real> PosetSystem<T> {
    pub fn new(poset: Poset, a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let s = poset.len();
        if a.shape() != (s, s) || b.shape() != (s, s) {
            return Err(Error::dim(format!(
                "A and B must be {s}x{s}, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        if c.ncols() != s || d.ncols() != s || c.nrows() != d.nrows() {
            return Err(Error::dim(format!(
                "C and D must be p x {s} with equal p, got {:?} and {:?}",
                c.shape(),
                d.shape()
            )));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(format!("{name} has non-finite entries")));
            }
        }
        {
            let alg = IncidenceAlgebra::<T>::new(&poset);
            if !alg.is_member(&a) {
                return Err(Error::contract("A is not in the incidence algebra"));
            }
            if !alg.is_member(&b) {
                return Err(Error::contract("B is not in the incidence algebra"));
            }
        }
        Ok(PosetSystem { poset, a, b, c, d })
    }

    pub fn poset(&self) -> &Poset {
        &self.poset
    }

    pub fn algebra(&self) -> IncidenceAlgebra<'_, T> {
        IncidenceAlgebra::new(&self.poset)
    }

    pub fn states(&self) -> usize {
        self.poset.len()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `(A(↓j,↓j), B(↓j,↓j), C(:,↓j), D(:,↓j))`.
    pub fn restriction(&self, j: usize) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>, DMatrix<T>) {
        let idx = self.poset.down(j);
        (
            square_select(&self.a, &idx),
            square_select(&self.b, &idx),
            self.c.select_columns(&idx),
            self.d.select_columns(&idx),
        )
    }
}

fn square_select<T: Real>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    m.select_rows(idx).select_columns(idx)
}

fn synthesis_error(poset: &Poset, j: usize, e: Error) -> Error {
    Error::Synthesis { element: poset.label(j).to_string(), reason: e.to_string() }
}

/// Solves the Riccati equation of the `↓j` restriction for every `j`.
pub fn restricted_care<T: Real>(sys: &PosetSystem<T>) -> Result<Vec<CareSolution<T>>> {
    (0..sys.states())
        .map(|j| {
            let (a, b, c, d) = sys.restriction(j);
            solve_care(&a, &b, &c, &d).map_err(|e| synthesis_error(&sys.poset, j, e))
        })
        .collect()
}

/// `F(j) = K(↓j,↓j)` from the restricted Riccati equations.
pub fn optimal_gains<T: Real>(sys: &PosetSystem<T>) -> Result<GainFamily<T>> {
    let gains = restricted_care(sys)?.into_iter().map(|sol| sol.k).collect();
    GainFamily::new(&sys.poset, gains)
}

/// `U_d = ζ(F ∘ μ(X))`; `u_i` is the diagonal entry `(i, i)`.
pub fn control_law<T: Real>(
    alg: &IncidenceAlgebra<'_, T>,
    gains: &GainFamily<T>,
    x: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    Ok(alg.zeta_local(&alg.local_product(gains, &alg.mu_local(x))?))
}

/// `A(↓i,↓i) + B(↓i,↓i) F(i)` for each `i`.
pub fn modified_closed_loop<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>) -> Result<Vec<DMatrix<T>>> {
    check_gains(sys, gains)?;
    Ok((0..sys.states())
        .map(|i| {
            let (a, b, _, _) = sys.restriction(i);
            a + b * gains.gain(i)
        })
        .collect())
}

fn check_gains<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>) -> Result<()> {
    if gains.len() != sys.states() {
        return Err(Error::dim(format!(
            "{} gains for a poset of {} elements",
            gains.len(),
            sys.states()
        )));
    }
    for i in 0..sys.states() {
        if gains.support(i) != sys.poset.down(i).as_slice() {
            return Err(Error::contract(format!("gain {} is not supported on ↓{}", i, sys.poset.label(i))));
        }
    }
    Ok(())
}

/// Free-variable closed loop.
#[derive(Clone, Debug)]
pub struct ClosedLoop<T: Real> {
    /// Interval coordinates `(i, j)`, `i ≼ j`.
    pub intervals: Vec<(usize, usize)>,
    /// `d/dt vec(X_d) = a · vec(X_d) + e · w`.
    pub a: DMatrix<T>,
    /// Disturbance injection onto the diagonal coordinates.
    pub e: DMatrix<T>,
    /// Rows returning the true state `x`.
    pub cx: DMatrix<T>,
    /// Rows returning the applied input `u`.
    pub cu: DMatrix<T>,
    /// Rows returning `z = C x + D u`.
    pub cz: DMatrix<T>,
}

impl<T: Real> ClosedLoop<T> {
    pub fn order(&self) -> usize {
        self.intervals.len()
    }

    /// Packs the d-pattern of a local variable into interval coordinates.
    pub fn pack(&self, x_d: &DMatrix<T>) -> DVector<T> {
        DVector::from_iterator(self.order(), self.intervals.iter().map(|&(i, j)| x_d[(j, i)]))
    }

    pub fn unpack(&self, v: &DVector<T>) -> DMatrix<T> {
        let s = self.cx.nrows();
        let mut out = DMatrix::zeros(s, s);
        for (k, &(i, j)) in self.intervals.iter().enumerate() {
            out[(j, i)] = v[k];
        }
        out
    }

    /// Initial free variables when every subsystem knows only its own state.
    pub fn initial_state(&self, x0: &[T]) -> DVector<T> {
        DVector::from_iterator(
            self.order(),
            self.intervals.iter().map(|&(i, j)| if i == j { x0[i] } else { T::zero() }),
        )
    }

    /// Realization of the map `w → z`.
    pub fn performance(&self) -> StateSpace<T> {
        let (p, s) = (self.cz.nrows(), self.e.ncols());
        StateSpace { a: self.a.clone(), b: self.e.clone(), c: self.cz.clone(), d: DMatrix::zeros(p, s) }
    }
}

/// The pieces of `Π_d(A X + B U)` for a given set of free variables.
#[derive(Clone, Debug)]
pub struct LoopSignals<T: Real> {
    /// Completed local state `X = μ(X_d) ζᵀ`.
    pub x: DMatrix<T>,
    pub u_d: DMatrix<T>,
    /// Completed local input `U = μ(U_d) ζᵀ`.
    pub u: DMatrix<T>,
    /// `A X + B U` before projection.
    pub drift: DMatrix<T>,
}

/// Evaluates the control law and the raw drift for free variables `x_d`.
pub fn loop_signals<T: Real>(
    sys: &PosetSystem<T>,
    gains: &GainFamily<T>,
    x_d: &DMatrix<T>,
) -> Result<LoopSignals<T>> {
    let alg = sys.algebra();
    let x = alg.complete_from_downstream(x_d)?;
    let u_d = control_law(&alg, gains, &x)?;
    let u = alg.complete_from_downstream(&u_d)?;
    let drift = &sys.a * &x + &sys.b * &u;
    Ok(LoopSignals { x, u_d, u, drift })
}

/// Builds the free-variable dynamics by pushing each interval basis vector
/// through completion, the control law and `Π_d(A X + B U)`.
pub fn assemble_closed_loop<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>) -> Result<ClosedLoop<T>> {
    check_gains(sys, gains)?;
    let s = sys.states();
    let intervals = sys.poset.intervals();
    let n = intervals.len();
    let mut a = DMatrix::zeros(n, n);
    let mut cu = DMatrix::zeros(s, n);
    let mut e = DMatrix::zeros(n, s);
    let mut cx = DMatrix::zeros(s, n);
    for (col, &(i, j)) in intervals.iter().enumerate() {
        let mut x_d = DMatrix::zeros(s, s);
        x_d[(j, i)] = T::one();
        let sig = loop_signals(sys, gains, &x_d)?;
        for (row, &(k, l)) in intervals.iter().enumerate() {
            a[(row, col)] = sig.drift[(l, k)];
        }
        for k in 0..s {
            cu[(k, col)] = sig.u_d[(k, k)];
        }
        if i == j {
            e[(col, i)] = T::one();
            cx[(i, col)] = T::one();
        }
    }
    let cz = &sys.c * &cx + &sys.d * &cu;
    Ok(ClosedLoop { intervals, a, e, cx, cu, cz })
}

/// Spectral comparison between the assembled loop and the decoupled closures.
#[derive(Clone, Debug)]
pub struct SeparationReport<T: Real> {
    pub closed_loop: Vec<Complex<T>>,
    /// Spectrum of `A(↓i,↓i) + B(↓i,↓i)F(i)` per element.
    pub restricted: Vec<Vec<Complex<T>>>,
    /// Largest pairwise distance after matching, `None` on a count mismatch.
    pub max_distance: Option<T>,
    pub tolerance: T,
    pub matched: bool,
    pub stable: bool,
    /// Elements whose restricted closure is not Hurwitz.
    pub unstable_elements: Vec<usize>,
}

pub fn separation_report<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>) -> Result<SeparationReport<T>> {
    let cl = assemble_closed_loop(sys, gains)?;
    let closed_loop = eigenvalues(&cl.a)?;
    let restricted = modified_closed_loop(sys, gains)?
        .iter()
        .map(eigenvalues)
        .collect::<Result<Vec<_>>>()?;
    let union: Vec<_> = restricted.iter().flatten().copied().collect();
    let max_distance = spectrum_distance(&closed_loop, &union);
    let tolerance = T::tol(SEPARATION_TOL) * (T::one() + cl.a.norm());
    let matched = max_distance.is_some_and(|d| d < tolerance);
    let unstable_elements: Vec<usize> = restricted
        .iter()
        .enumerate()
        .filter(|(_, spec)| spec.iter().any(|z| z.re >= T::zero()))
        .map(|(i, _)| i)
        .collect();
    let stable = unstable_elements.is_empty() && closed_loop.iter().all(|z| z.re < T::zero());
    Ok(SeparationReport { closed_loop, restricted, max_distance, tolerance, matched, stable, unstable_elements })
}

/// Largest entry of `Π_uo(μ(Π_d(AX + BU)) ζᵀ) − Π_uo(AX + BU)`: the two
/// ways of differentiating the completed upstream and off-stream predictions.
pub fn uo_derivative_gap<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>, x_d: &DMatrix<T>) -> Result<T> {
    let alg = sys.algebra();
    let sig = loop_signals(sys, gains, x_d)?;
    let via_completion = alg.project_uo(&(alg.mu_local(&sig.drift) * alg.zeta().transpose()));
    let direct = alg.project_uo(&sig.drift);
    Ok(crate::scalar::max_abs(&(via_completion - direct)))
}

/// Explicit controller with state `q(j) = μ(X)^j` on `↓↓j`.
#[derive(Clone, Debug)]
pub struct ControllerRealization<T: Real> {
    /// `(j, k)` for each controller state: component `k ∈ ↓↓j` of `q(j)`.
    pub states: Vec<(usize, usize)>,
    /// `q̇ = a_k q + b_k x`, `u = c_k q + d_k x`.
    pub dynamics: StateSpace<T>,
}

impl<T: Real> ControllerRealization<T> {
    pub fn order(&self) -> usize {
        self.states.len()
    }

    /// Plant in feedback with the controller, state `[x; q]`, input `w`,
    /// outputs `[x; u]`.
    pub fn interconnect(&self, sys: &PosetSystem<T>) -> Result<StateSpace<T>> {
        let s = sys.states();
        let nq = self.order();
        let k = &self.dynamics;
        let mut a = DMatrix::zeros(s + nq, s + nq);
        a.view_mut((0, 0), (s, s)).copy_from(&(&sys.a + &sys.b * &k.d));
        a.view_mut((0, s), (s, nq)).copy_from(&(&sys.b * &k.c));
        a.view_mut((s, 0), (nq, s)).copy_from(&k.b);
        a.view_mut((s, s), (nq, nq)).copy_from(&k.a);
        let mut b = DMatrix::zeros(s + nq, s);
        b.view_mut((0, 0), (s, s)).fill_with_identity();
        let mut c = DMatrix::zeros(2 * s, s + nq);
        c.view_mut((0, 0), (s, s)).fill_with_identity();
        c.view_mut((s, 0), (s, s)).copy_from(&k.d);
        c.view_mut((s, s), (s, nq)).copy_from(&k.c);
        StateSpace::new(a, b, c, DMatrix::zeros(2 * s, s))
    }
}

/// Realizes
/// `q̇(j) = A22(j) q(j) + A21(j) (x_j − Σ_{k≺j} q_j(k))`,
/// `u_j = Σ_{k≼j} row_j(F(k)) [x_k − Σ_{l≺k} q_k(l); q(k)]`,
/// where `A(j) = A(↓j,↓j) + B(↓j,↓j)F(j)` is split at its first coordinate.
pub fn controller_realization<T: Real>(
    sys: &PosetSystem<T>,
    gains: &GainFamily<T>,
) -> Result<ControllerRealization<T>> {
    let closures = modified_closed_loop(sys, gains)?;
    let p = &sys.poset;
    let s = p.len();
    let states: Vec<(usize, usize)> = (0..s)
        .flat_map(|j| p.strict_down(j).into_iter().map(move |k| (j, k)))
        .collect();
    let nq = states.len();
    let slot = |j: usize, k: usize| states.iter().position(|&e| e == (j, k));

    // μ(X)^k = m_x[k] x + m_q[k] q, rows indexed by ↓k.
    let mut m_x = Vec::with_capacity(s);
    let mut m_q = Vec::with_capacity(s);
    for k in 0..s {
        let down = p.down(k);
        debug_assert_eq!(down[0], k);
        let mut mx = DMatrix::zeros(down.len(), s);
        let mut mq = DMatrix::zeros(down.len(), nq);
        mx[(0, k)] = T::one();
        for l in (0..s).filter(|&l| p.lt(l, k)) {
            let idx = slot(l, k).expect("k is strictly downstream of l");
            mq[(0, idx)] -= T::one();
        }
        for (r, &m) in down.iter().enumerate().skip(1) {
            mq[(r, slot(k, m).expect("m in ↓↓k"))] = T::one();
        }
        m_x.push(mx);
        m_q.push(mq);
    }

    let mut a_k = DMatrix::zeros(nq, nq);
    let mut b_k = DMatrix::zeros(nq, s);
    for j in 0..s {
        let cl = &closures[j];
        let dim = cl.nrows();
        if dim <= 1 {
            continue;
        }
        let rows: Vec<usize> = (1..dim).map(|r| slot(j, p.down(j)[r]).expect("slot exists")).collect();
        // q̇(j) = [A21 A22] μ(X)^j
        let drift_x = cl.rows(1, dim - 1) * &m_x[j];
        let drift_q = cl.rows(1, dim - 1) * &m_q[j];
        for (r, &row) in rows.iter().enumerate() {
            for c in 0..s {
                b_k[(row, c)] = drift_x[(r, c)];
            }
            for c in 0..nq {
                a_k[(row, c)] = drift_q[(r, c)];
            }
        }
    }

    let mut c_k = DMatrix::zeros(s, nq);
    let mut d_k = DMatrix::zeros(s, s);
    for j in 0..s {
        for k in (0..s).filter(|&k| p.leq(k, j)) {
            let pos = p.down(k).iter().position(|&m| m == j).expect("j ∈ ↓k");
            let row = gains.gain(k).row(pos);
            let dx = row * &m_x[k];
            let dq = row * &m_q[k];
            for c in 0..s {
                d_k[(j, c)] += dx[c];
            }
            for c in 0..nq {
                c_k[(j, c)] += dq[c];
            }
        }
    }
    let dynamics = StateSpace::new(a_k, b_k, c_k, d_k)?;
    Ok(ControllerRealization { states, dynamics })
}

/// Whether every restricted closure is Hurwitz.
pub fn gains_stabilize<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>) -> Result<bool> {
    for m in modified_closed_loop(sys, gains)? {
        if !is_hurwitz(&m, T::zero())? {
            return Ok(false);
        }
    }
    Ok(true)
}
