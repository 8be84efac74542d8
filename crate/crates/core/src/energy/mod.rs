//! The energy functional, its gradient and Hessian.

mod functional;
mod potential;

pub use functional::{
    grad_j_eps, hess_j_eps_apply, i_bar, j_eps, EnergyBreakdown, Functional, Linearization,
    ProblemParams,
};
pub use potential::{PotentialSpec, RadialTable};

#[cfg(test)]
mod tests;
