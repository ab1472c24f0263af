//! Klein-Gordon equation with a singular, position-dependent mass.
//!
//! The singular coefficient (a delta or the formal square of a delta) is
//! replaced by a mollified net `m_eps`, the regularized problems are solved
//! with a spectral splitting scheme or an implicit finite-difference sweep,
//! and the `eps -> 0` behaviour is measured: moderateness of the nets,
//! boundedness of the solutions, insensitivity to negligible changes of the
//! regularization, and convergence to the classical solution for bounded
//! masses. The wall effect of a `delta^2` barrier is reproduced as a
//! scattering experiment.

pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod io;
pub mod mass;
pub mod propagation;
mod tridiag;

pub use config::{MassCase, SimulationConfig, Tolerances};
pub use energy::{
    energy, l2_norm, reflection_coefficient, triple_norm, EnergyRecord, ScatterRecord,
};
pub use error::{KgError, Result};
pub use grid::{frac_half_norm, frac_laplacian_apply, Grid1D, Spectrum};
pub use mass::{
    moderateness_exponent, mollifier, mollifier_constant, negligible_perturbation, regularize,
    BoundedProfile, MassSpec, ModeratenessReport, Perturbation, RegularizedMass,
};
pub use propagation::{
    evolve, free_propagate, initial_bump, step_implicit_fd, step_spectral_strang, Evolution,
    FieldState, SchemeId,
};
