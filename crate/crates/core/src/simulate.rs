//! Time-domain runs: the continuous free-variable loop and the discrete
//! disturbance-feedback pipeline.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::incidence::IncidenceAlgebra;
use crate::numlin::{is_hurwitz, spectral_radius};
use crate::poset::Poset;
use crate::scalar::Real;
use crate::synthesis::{ClosedLoop, PosetSystem};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 20.0;
pub const DEFAULT_TAPS: usize = 8;

/// Sampled trajectory. Rows of `w`/`what` are present only for discrete runs;
/// row `t` then carries `w[t−1]` and its reconstruction (zero at `t = 0`).
#[derive(Clone, Debug)]
pub struct Trace<T: Real> {
    pub t: Vec<T>,
    pub x: Vec<DVector<T>>,
    /// Free variables in interval order.
    pub xd: Vec<DVector<T>>,
    pub u: Vec<DVector<T>>,
    pub z: Vec<DVector<T>>,
    pub w: Option<Vec<DVector<T>>>,
    pub what: Option<Vec<DVector<T>>>,
}

impl<T: Real> Trace<T> {
    pub fn empty() -> Self {
        Trace { t: Vec::new(), x: Vec::new(), xd: Vec::new(), u: Vec::new(), z: Vec::new(), w: None, what: None }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Writes one CSV row per sample. Indices in column names are 1-based
    /// positions in the linear extension.
    pub fn write_csv<W: Write>(&self, intervals: &[(usize, usize)], out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        let s = self.x.first().map_or(0, |v| v.len());
        let p = self.z.first().map_or(0, |v| v.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=s).map(|i| format!("x_{i}")));
        header.extend(intervals.iter().map(|&(i, j)| format!("xd_{}_{}", i + 1, j + 1)));
        header.extend((1..=s).map(|i| format!("u_{i}")));
        header.extend((1..=p).map(|i| format!("z_{i}")));
        let discrete = self.w.is_some() && self.what.is_some();
        if discrete {
            header.extend((1..=s).map(|i| format!("w_{i}")));
            header.extend((1..=s).map(|i| format!("what_{i}")));
        }
        wr.write_record(&header).map_err(csv_error)?;
        for k in 0..self.len() {
            let mut row = vec![self.t[k].to_f64_lossy()];
            row.extend(self.x[k].iter().map(|v| v.to_f64_lossy()));
            row.extend(self.xd[k].iter().map(|v| v.to_f64_lossy()));
            row.extend(self.u[k].iter().map(|v| v.to_f64_lossy()));
            row.extend(self.z[k].iter().map(|v| v.to_f64_lossy()));
            if let (Some(w), Some(what)) = (&self.w, &self.what) {
                row.extend(w[k].iter().map(|v| v.to_f64_lossy()));
                row.extend(what[k].iter().map(|v| v.to_f64_lossy()));
            }
            wr.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_error)?;
        }
        wr.flush().map_err(|e| Error::numerical(format!("writing trace: {e}")))?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::numerical(format!("writing trace: {e}"))
}

fn check_finite<T: Real>(v: &DVector<T>, step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { step })
    }
}

/// Classical RK4 on `ξ̇ = A ξ + E w(t)` from interval state `xi0`.
pub fn simulate_continuous<T: Real, F>(
    cl: &ClosedLoop<T>,
    xi0: &DVector<T>,
    disturbance: F,
    horizon: T,
    dt: T,
) -> Result<Trace<T>>
where
    F: Fn(T) -> DVector<T>,
{
    if !dt.is_finite() || dt <= T::zero() || horizon < dt {
        return Err(Error::contract("need dt > 0 and horizon ≥ dt"));
    }
    if xi0.len() != cl.order() {
        return Err(Error::dim(format!("initial state has {} entries, loop order is {}", xi0.len(), cl.order())));
    }
    let steps = (horizon / dt).round().to_usize().unwrap_or(0).max(1);
    let f = |t: T, xi: &DVector<T>| &cl.a * xi + &cl.e * disturbance(t);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);

    let mut trace = Trace::empty();
    let mut xi = xi0.clone();
    check_finite(&xi, 0)?;
    for k in 0..=steps {
        let t = dt * T::from_usize(k).expect("step count representable");
        trace.t.push(t);
        trace.x.push(&cl.cx * &xi);
        trace.u.push(&cl.cu * &xi);
        trace.z.push(&cl.cz * &xi);
        trace.xd.push(xi.clone());
        if k == steps {
            break;
        }
        let k1 = f(t, &xi);
        let k2 = f(t + half * dt, &(&xi + &k1 * (half * dt)));
        let k3 = f(t + half * dt, &(&xi + &k2 * (half * dt)));
        let k4 = f(t + dt, &(&xi + &k3 * dt));
        xi += (k1 + k2 * two + k3 * two + k4) * (dt * sixth);
        check_finite(&xi, k + 1)?;
    }
    Ok(trace)
}

/// FIR disturbance-feedback filter `U[t] = Σ_k Q_k Ŵ[t−1−k] ζᵀ` with taps in
/// the incidence algebra.
#[derive(Clone, Debug)]
pub struct YoulaFilter<T: Real> {
    taps: Vec<DMatrix<T>>,
}

impl<T: Real> YoulaFilter<T> {
    pub fn new(poset: &Poset, taps: Vec<DMatrix<T>>) -> Result<Self> {
        let alg = IncidenceAlgebra::<T>::new(poset);
        for (k, q) in taps.iter().enumerate() {
            if q.shape() != (poset.len(), poset.len()) {
                return Err(Error::dim(format!("tap {k} has shape {:?}", q.shape())));
            }
            if !alg.is_member(q) {
                return Err(Error::contract(format!("tap {k} is not in the incidence algebra")));
            }
        }
        Ok(YoulaFilter { taps })
    }

    pub fn zero(poset: &Poset, len: usize) -> Self {
        let s = poset.len();
        YoulaFilter { taps: vec![DMatrix::zeros(s, s); len] }
    }

    /// Taps with entries uniform in `[−scale, scale]` on the incidence pattern.
    pub fn random<R: Rng>(poset: &Poset, len: usize, scale: f64, rng: &mut R) -> Self {
        let s = poset.len();
        let taps = (0..len)
            .map(|_| {
                DMatrix::from_fn(s, s, |r, c| {
                    if poset.in_incidence_pattern(r, c) {
                        T::lit(rng.gen_range(-scale..=scale))
                    } else {
                        T::zero()
                    }
                })
            })
            .collect();
        YoulaFilter { taps }
    }

    pub fn taps(&self) -> &[DMatrix<T>] {
        &self.taps
    }

    /// Tap-wise `a·self + b·other`; shorter filters are zero-extended.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let n = self.taps.len().max(other.taps.len());
        let s = self.taps.first().or(other.taps.first()).map_or(0, |q| q.nrows());
        let zero = DMatrix::zeros(s, s);
        let taps = (0..n)
            .map(|k| self.taps.get(k).unwrap_or(&zero) * a + other.taps.get(k).unwrap_or(&zero) * b)
            .collect();
        YoulaFilter { taps }
    }
}

/// `μ(X[t] − X̂[t])`, the reconstructed disturbance matrix `W[t−1]`.
pub fn youla_reconstruct<T: Real>(
    alg: &IncidenceAlgebra<'_, T>,
    x_t: &DMatrix<T>,
    x_hat_t: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if x_t.shape() != x_hat_t.shape() {
        return Err(Error::dim("local state and prediction differ in shape"));
    }
    Ok(alg.mu_local(&(x_t - x_hat_t)))
}

/// Result of a discrete run.
#[derive(Clone, Debug)]
pub struct DiscreteRun<T: Real> {
    pub trace: Trace<T>,
    /// Largest `|Ŵ[t−1] − diag(w[t−1])|` over the run.
    pub max_reconstruction_error: T,
}

/// Iterates `X[t] = A X[t−1] + B U[t−1] + diag(w[t−1]) ζᵀ` from
/// `X[0] = diag(x0) ζᵀ` for `w.len()` steps, with discrete-time `A`, `B`.
pub fn simulate_discrete<T: Real>(
    sys: &PosetSystem<T>,
    filter: &YoulaFilter<T>,
    x0: &DVector<T>,
    w: &[DVector<T>],
) -> Result<DiscreteRun<T>> {
    let s = sys.states();
    if spectral_radius(&sys.a)? >= T::one() {
        return Err(Error::contract("discrete A must have spectral radius below 1"));
    }
    if x0.len() != s || w.iter().any(|v| v.len() != s) {
        return Err(Error::dim(format!("initial state and disturbances must have {s} entries")));
    }
    for q in filter.taps() {
        if q.shape() != (s, s) {
            return Err(Error::dim("filter taps do not match the system"));
        }
    }
    let alg = sys.algebra();
    let zeta_t = alg.zeta().transpose();
    let intervals = sys.poset().intervals();
    let pack = |x: &DMatrix<T>| DVector::from_iterator(intervals.len(), intervals.iter().map(|&(i, j)| x[(j, i)]));
    let diag = |m: &DMatrix<T>| DVector::from_iterator(s, (0..s).map(|i| m[(i, i)]));

    let mut x = DMatrix::from_diagonal(x0) * &zeta_t;
    // Ŵ[t−1−k] history, most recent first.
    let mut history: Vec<DMatrix<T>> = Vec::new();
    let input = |history: &[DMatrix<T>]| {
        let mut u = DMatrix::zeros(s, s);
        for (q, w_hat) in filter.taps().iter().zip(history) {
            u += q * w_hat * &zeta_t;
        }
        u
    };
    let mut u = input(&history);

    let mut trace = Trace { w: Some(Vec::new()), what: Some(Vec::new()), ..Trace::empty() };
    let mut worst = T::zero();
    let record = |trace: &mut Trace<T>, t: usize, x: &DMatrix<T>, u: &DMatrix<T>, w: DVector<T>, what: DVector<T>| {
        let (xv, uv) = (diag(x), diag(u));
        trace.t.push(T::from_usize(t).expect("step representable"));
        trace.z.push(&sys.c * &xv + &sys.d * &uv);
        trace.x.push(xv);
        trace.u.push(uv);
        trace.xd.push(pack(x));
        trace.w.as_mut().expect("discrete trace").push(w);
        trace.what.as_mut().expect("discrete trace").push(what);
    };
    record(&mut trace, 0, &x, &u, DVector::zeros(s), DVector::zeros(s));

    for (step, w_prev) in w.iter().enumerate() {
        let predicted = &sys.a * &x + &sys.b * &u;
        let next = &predicted + DMatrix::from_diagonal(w_prev) * &zeta_t;
        check_finite(&DVector::from_column_slice(next.as_slice()), step + 1)?;
        let w_hat = youla_reconstruct(&alg, &next, &predicted)?;
        worst = worst.max(crate::scalar::max_abs(&(&w_hat - DMatrix::from_diagonal(w_prev))));
        let what = diag(&w_hat);
        history.insert(0, w_hat);
        history.truncate(filter.taps().len());
        x = next;
        u = input(&history);
        record(&mut trace, step + 1, &x, &u, w_prev.clone(), what);
    }
    Ok(DiscreteRun { trace, max_reconstruction_error: worst })
}

/// Uniform `[−1, 1]` disturbance sequence from a fixed seed.
pub fn random_disturbances<T: Real>(s: usize, steps: usize, seed: u64) -> Vec<DVector<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| DVector::from_fn(s, |_, _| T::lit(rng.gen_range(-1.0..=1.0))))
        .collect()
}

/// Forward-Euler map `A_d = I + hA`, `B_d = hB` with the largest
/// `h = 2^{−k} ≤ 1` giving spectral radius below one.
pub fn euler_discretize<T: Real>(sys: &PosetSystem<T>) -> Result<(PosetSystem<T>, T)> {
    let s = sys.states();
    if !is_hurwitz(&sys.a, T::zero())? {
        return Err(Error::contract("forward-Euler mapping needs a Hurwitz A"));
    }
    let mut h = T::one();
    for _ in 0..60 {
        let a_d = DMatrix::identity(s, s) + &sys.a * h;
        if spectral_radius(&a_d)? < T::one() {
            let d = PosetSystem::new(sys.poset().clone(), a_d, &sys.b * h, sys.c.clone(), sys.d.clone())?;
            return Ok((d, h));
        }
        h *= T::lit(0.5);
    }
    Err(Error::contract("no Euler step makes the discrete map stable; A must be Hurwitz"))
}
