//! Dense numerical kernels: spectra, Lyapunov and Riccati solvers, H2 norms.

pub mod care;
pub mod eigen;
pub mod lyapunov;
pub mod statespace;

pub use care::{care_residual, solve_care, CareSolution};
pub use eigen::{eigenvalues, is_hurwitz, spectral_abscissa, spectral_radius, spectrum_distance};
pub use lyapunov::{lyapunov_residual, solve_lyapunov, solve_lyapunov_kronecker};
pub use statespace::{h2_norm_squared, StateSpace};
