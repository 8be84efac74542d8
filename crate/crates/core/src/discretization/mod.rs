//! Grids, fields, stencils and the solvers built on them.

mod fast_solve;
mod field;
mod grid;
mod io;
mod krylov;
mod ops;
pub(crate) mod stencil;

pub use fast_solve::FastSolver;
pub use field::{ScalarField, VectorField};
pub use grid::{BoxGrid, Centering, Grid, RadialGrid};
pub use io::{field_from_bytes, field_from_csv, field_to_bytes, field_to_csv, read_field, write_field};
pub use krylov::{lanczos_ritz, lanczos_ritz_on, minres, pcg, KrylovStats};
pub use ops::{div_p4, grad, inner_h1, laplacian_apply, norm_lq, riesz_h1_solve};
pub use stencil::FarField;

pub(crate) use krylov::dot;
pub(crate) use ops::quartic_sum;
