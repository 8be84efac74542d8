//! Numerical Lyapunov–Schmidt reduction for a semiclassical quasilinear
//! Schrödinger–Poisson system.

pub mod discretization;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod profile;
pub mod quasipoisson;
pub mod reduction;

pub use discretization::{BoxGrid, Grid, RadialGrid, ScalarField, VectorField};
pub use energy::PotentialSpec;
pub use error::{Error, Result};
pub use energy::{Functional, ProblemParams};
pub use profile::{RadialProfile, TangentFrame};
pub use quasipoisson::{PoissonParams, PoissonSolution};
