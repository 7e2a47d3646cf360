//! Möbius-inversion controllers for poset-causal linear systems.
//!
//! Subsystems are the elements of a finite poset. Each subsystem keeps a
//! local prediction of the global state; the controller acts on the Möbius
//! transform of those predictions, which decouples synthesis into one
//! Riccati equation per element.
//!
//! ```
//! use poset_mobius::{optimal_gains, separation_report, Poset, System};
//! use nalgebra::DMatrix;
//!
//! let p = Poset::chain(2);
//! let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
//! let c = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
//! let d = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
//! let sys = System::new(p, a, DMatrix::identity(2, 2), c, d).unwrap();
//! let gains = optimal_gains(&sys).unwrap();
//! assert!(separation_report(&sys, &gains).unwrap().stable);
//! ```
//!
//! Numerical code is generic over [`scalar::Real`] (`f32`, `f64`); the zeta
//! and Möbius matrices are available over any integer or rational ring.

pub mod blockdiag;
pub mod error;
pub mod h2_eval;
pub mod incidence;
pub mod numlin;
pub mod poset;
pub mod scalar;
pub mod simulate;
pub mod synthesis;

pub use blockdiag::{build_vector_operators, check_block_diagonal, lift_plant, BlockDiagonalReport, VectorOperators};
pub use error::{Error, Result};
pub use h2_eval::{closed_loop_h2, column_oracle_costs, optimality_certificate, Certificate, OracleCosts};
pub use incidence::{embed, GainFamily, IncidenceAlgebra};
pub use poset::{Label, OrderSets, Poset, PosetSpec};
pub use scalar::Real;
pub use simulate::{
    euler_discretize, random_disturbances, simulate_continuous, simulate_discrete, youla_reconstruct, DiscreteRun,
    Trace, YoulaFilter,
};
pub use synthesis::{
    assemble_closed_loop, control_law, controller_realization, modified_closed_loop, optimal_gains,
    separation_report, ClosedLoop, ControllerRealization, PosetSystem, SeparationReport,
};

/// Double-precision system.
pub type System = PosetSystem<f64>;
pub type SystemF32 = PosetSystem<f32>;
pub type Gains = GainFamily<f64>;
pub type GainsF32 = GainFamily<f32>;
pub type Loop = ClosedLoop<f64>;
pub type Algebra<'p> = IncidenceAlgebra<'p, f64>;
