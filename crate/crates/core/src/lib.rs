//! Implicit solvers and estimate checks for the anisotropic p-Laplacian
//! evolution problem on rectangular grids.

pub mod elliptic;
pub mod error;
pub mod exponents;
pub mod flux;
pub mod grid;
pub mod io;
pub mod operator;
pub mod parabolic;
pub mod trajectory;
pub mod verify;

#[cfg(test)]
mod test_oracles;

pub use error::{Error, Result};
pub use elliptic::{solve_elliptic, EllipticSpec};
pub use exponents::{decay_profile, harmonic_mean, sobolev_critical, DecayProfile, ExponentVector, Regime};
pub use flux::{verify_structure, FluxKind, FluxModel, StructureReport};
pub use grid::{anisotropic_energy, norm, truncate_gk, truncate_tn, Field, Grid};
pub use parabolic::{sola_solve, solve_parabolic, step_implicit, Forcing, ProblemSpec, SolaReport};
pub use trajectory::{lrs_norm, NormRecord, Trajectory};
