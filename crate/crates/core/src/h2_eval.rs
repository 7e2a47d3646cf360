//! H2 cost of the closed loop and the column-by-column optimality oracle.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::incidence::GainFamily;
use crate::numlin::h2_norm_squared;
use crate::synthesis::{assemble_closed_loop, restricted_care, PosetSystem};
use crate::scalar::Real;

/// Squared H2 norm of `w → z` for the assembled closed loop.
pub fn closed_loop_h2<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>) -> Result<T> {
    let cl = assemble_closed_loop(sys, gains)?;
    h2_norm_squared(&cl.performance())
}

/// Per-element costs of the decoupled problems and their sum.
#[derive(Clone, Debug)]
pub struct OracleCosts<T: Real> {
    /// Optimal cost of the `↓j` problem driven by a unit disturbance on `x_j`.
    pub columns: Vec<T>,
    pub total: T,
}

/// Cost `P_j(j, j)` of each restricted Riccati solution. Element `j` leads
/// its own downstream set, so the entry sits at position 0.
pub fn column_oracle_costs<T: Real>(sys: &PosetSystem<T>) -> Result<OracleCosts<T>> {
    let columns: Vec<T> = restricted_care(sys)?.iter().map(|sol| sol.p[(0, 0)]).collect();
    let total = columns.iter().fold(T::zero(), |a, &b| a + b);
    Ok(OracleCosts { columns, total })
}

/// Closed-loop value against the oracle.
#[derive(Clone, Debug)]
pub struct Certificate<T: Real> {
    pub oracle: OracleCosts<T>,
    pub closed_loop: T,
    /// `|closed_loop − total| / total`.
    pub relative_gap: T,
}

pub fn optimality_certificate<T: Real>(sys: &PosetSystem<T>, gains: &GainFamily<T>) -> Result<Certificate<T>> {
    let oracle = column_oracle_costs(sys)?;
    let closed_loop = closed_loop_h2(sys, gains)?;
    let scale = oracle.total.abs().max(T::lit(f64::MIN_POSITIVE));
    let relative_gap = (closed_loop - oracle.total).abs() / scale;
    Ok(Certificate { oracle, closed_loop, relative_gap })
}

/// Adds `scale · Δ(i)` to each gain, with `Δ` given on `↓i × ↓i`.
pub fn perturb<T: Real>(gains: &GainFamily<T>, delta: &[DMatrix<T>], scale: T) -> Result<GainFamily<T>> {
    if delta.len() != gains.len() {
        return Err(Error::Dimension(format!("{} perturbations for {} gains", delta.len(), gains.len())));
    }
    let mut out = gains.clone();
    for (i, d) in delta.iter().enumerate() {
        if d.shape() != gains.gain(i).shape() {
            return Err(Error::Dimension(format!("perturbation {i} has shape {:?}", d.shape())));
        }
        *out.gain_mut(i) += d * scale;
    }
    Ok(out)
}
