//! The potential `φ_ε(u)` solving `−ε⁻²Δφ − βε⁻⁴Δ₄φ = u²` and its
//! linearization in `u`.
//!
//! The discrete solution minimizes
//! `E(φ) = φᵀKφ/(2ε²) + β/(4ε⁴) Σ m|∇φ|⁴ − Σ m φ u²`, which is strictly convex.
//! Box grids use zero Dirichlet data on the ghost layer; radial grids use the
//! monopole exterior.

mod radial;

pub use radial::{cubic_flux_root, solve_phi_radial};

use std::sync::Arc;

use serde::Serialize;

use crate::discretization::stencil::{
    node_average, slopes, slopes_transpose, spread_to_edges, stiffness, FarField,
};
use crate::discretization::{dot, pcg, quartic_sum, FastSolver, Grid, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct PoissonParams {
    pub eps: f64,
    pub beta: f64,
    /// Relative first-order optimality target.
    pub tol: f64,
    pub max_iter: usize,
}

impl PoissonParams {
    pub fn new(eps: f64, beta: f64) -> Self {
        Self {
            eps,
            beta,
            tol: 1e-8,
            max_iter: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("poisson tol must be positive"));
        }
        Ok(())
    }

    fn a(&self) -> f64 {
        self.eps.powi(-2)
    }

    fn b(&self) -> f64 {
        self.beta * self.eps.powi(-4)
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub phi: ScalarField,
    /// Minimum value of `E`.
    pub energy_value: f64,
    /// `|ε⁻²‖∇φ‖² + βε⁻⁴‖∇φ‖⁴₄ − ∫φu²| / ∫φu²`
    pub identity_residual: f64,
    /// Final `‖∇E‖_{H⁻¹} / ‖M u²‖_{H⁻¹}`.
    pub optimality: f64,
    pub iterations: usize,
    /// Set when the source vanishes and `φ = 0` is returned without solving.
    pub degenerate: bool,
    /// Energies of the Newton iterates, starting from the warm start.
    pub energy_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoissonDiagnostics {
    pub energy_value: f64,
    pub identity_residual: f64,
    pub optimality: f64,
    pub iterations: usize,
    pub degenerate: bool,
}

impl PoissonSolution {
    pub fn diagnostics(&self) -> PoissonDiagnostics {
        PoissonDiagnostics {
            energy_value: self.energy_value,
            identity_residual: self.identity_residual,
            optimality: self.optimality,
            iterations: self.iterations,
            degenerate: self.degenerate,
        }
    }
}

fn far_field(grid: &Grid) -> FarField {
    match grid {
        Grid::Radial(_) => FarField::Monopole,
        Grid::Box(_) => FarField::Dirichlet,
    }
}

/// Reusable discrete operators for one grid and one `(ε, β)`.
pub struct PoissonOperator {
    grid: Arc<Grid>,
    params: PoissonParams,
    far: FarField,
    laplace: FastSolver,
    h1: FastSolver,
}

impl std::fmt::Debug for PoissonOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonOperator").field("params", &self.params).finish()
    }
}

impl PoissonOperator {
    pub fn new(grid: Arc<Grid>, params: PoissonParams) -> Result<Self> {
        params.validate()?;
        let far = far_field(&grid);
        let laplace = FastSolver::new(&grid, params.a(), 0.0, far);
        let h1 = FastSolver::new(&grid, 1.0, 1.0, FarField::Dirichlet);
        Ok(Self {
            grid,
            params,
            far,
            laplace,
            h1,
        })
    }

    pub fn params(&self) -> &PoissonParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn mass_times(&self, f: &[f64]) -> Vec<f64> {
        f.iter().enumerate().map(|(i, v)| self.grid.mass(i) * v).collect()
    }

    /// `E(φ)` for the nodal source `src`.
    fn energy(&self, phi: &[f64], src: &[f64]) -> f64 {
        let g = &*self.grid;
        let kphi = stiffness(g, phi, self.far);
        let quad = 0.5 * self.params.a() * dot(&kphi, phi);
        let quart = if self.params.beta > 0.0 {
            0.25 * self.params.b() * quartic_sum(g, &slopes(g, phi, self.far), self.far)
        } else {
            0.0
        };
        quad + quart - dot(&self.mass_times(src), phi)
    }

    /// `∇E(φ)` as a dual vector.
    fn gradient(&self, phi: &[f64], src: &[f64]) -> Vec<f64> {
        let g = &*self.grid;
        let mut out = stiffness(g, phi, self.far);
        let a = self.params.a();
        out.iter_mut().for_each(|v| *v *= a);
        if self.params.beta > 0.0 {
            let b = slopes(g, phi, self.far);
            let s = node_average(g, &b, &b, self.far);
            let kappa = spread_to_edges(g, &s, self.far);
            let flux: Vec<f64> = kappa.iter().zip(&b).map(|(k, x)| k * x).collect();
            let div = slopes_transpose(g, &flux, self.far);
            let c = self.params.b();
            out.iter_mut().zip(&div).for_each(|(o, d)| *o += c * d);
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o -= g.mass(i) * src[i];
        }
        out
    }

    /// Hessian of `E` at `φ`, as a closure on coefficient vectors.
    fn hessian<'a>(&'a self, phi: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + 'a {
        let g = &*self.grid;
        let far = self.far;
        let a = self.params.a();
        let c = self.params.b();
        let quartic = self.params.beta > 0.0;
        let (bphi, kappa) = if quartic {
            let b = slopes(g, phi, far);
            let s = node_average(g, &b, &b, far);
            let kappa = spread_to_edges(g, &s, far);
            (b, kappa)
        } else {
            (Vec::new(), Vec::new())
        };
        move |x: &[f64]| {
            let mut out = stiffness(g, x, far);
            out.iter_mut().for_each(|v| *v *= a);
            if quartic {
                let bx = slopes(g, x, far);
                let t = node_average(g, &bphi, &bx, far);
                let dk = spread_to_edges(g, &t, far);
                let flux: Vec<f64> = (0..bx.len())
                    .map(|e| kappa[e] * bx[e] + 2.0 * dk[e] * bphi[e])
                    .collect();
                let div = slopes_transpose(g, &flux, far);
                out.iter_mut().zip(&div).for_each(|(o, d)| *o += c * d);
            }
            out
        }
    }

    /// Discrete `H⁻¹` norm `sqrt(dᵀ(K+M)⁻¹d)` of a dual vector.
    fn dual_norm(&self, d: &[f64]) -> f64 {
        dot(d, &self.h1.solve(d)).max(0.0).sqrt()
    }

    /// `ε⁻²φᵀKφ`, `βε⁻⁴Σm|∇φ|⁴` and `Σ m φ u²`.
    fn identity_terms(&self, phi: &[f64], src: &[f64]) -> (f64, f64, f64) {
        let g = &*self.grid;
        let quad = self.params.a() * dot(&stiffness(g, phi, self.far), phi);
        let quart = if self.params.beta > 0.0 {
            self.params.b() * quartic_sum(g, &slopes(g, phi, self.far), self.far)
        } else {
            0.0
        };
        (quad, quart, dot(&self.mass_times(src), phi))
    }

    /// Minimizes `E` for the source `u_sq` by damped Newton from the β = 0
    /// solution.
    pub fn solve(&self, u_sq: &ScalarField) -> Result<PoissonSolution> {
        if !Arc::ptr_eq(u_sq.grid(), &self.grid) && **u_sq.grid() != *self.grid {
            return Err(Error::usage("source and operator live on different grids"));
        }
        if u_sq.values().iter().any(|v| *v < 0.0) {
            return Err(Error::usage("poisson source must be non-negative"));
        }
        self.solve_source(u_sq.values())
    }

    /// Same as [`PoissonOperator::solve`] for a source of either sign.
    pub fn solve_source(&self, src: &[f64]) -> Result<PoissonSolution> {
        self.solve_source_from(src, None)
    }

    /// Newton from `start` when given, else from the β = 0 solution.
    pub fn solve_source_from(&self, src: &[f64], start: Option<&[f64]>) -> Result<PoissonSolution> {
        if src.len() != self.grid.len() || start.is_some_and(|s| s.len() != src.len()) {
            return Err(Error::usage("source length does not match the grid"));
        }
        if src.iter().all(|v| *v == 0.0) {
            return Ok(PoissonSolution {
                phi: ScalarField::zeros(self.grid.clone()),
                energy_value: 0.0,
                identity_residual: 0.0,
                optimality: 0.0,
                iterations: 0,
                degenerate: true,
                energy_history: vec![0.0],
            });
        }
        let msrc = self.mass_times(src);
        let scale = self.dual_norm(&msrc);
        let tol = self.params.tol;
        let mut phi = match start {
            Some(s) => s.to_vec(),
            None => self.laplace.solve(&msrc),
        };
        let mut energy = self.energy(&phi, src);
        let mut history = vec![energy];
        let mut grad = self.gradient(&phi, src);
        let mut rel = self.dual_norm(&grad) / scale;
        let mut iterations = 0;
        while rel > tol {
            if iterations == self.params.max_iter {
                return Err(Error::SolverFailure {
                    solver: "poisson Newton",
                    iterations,
                    residual: rel,
                });
            }
            iterations += 1;
            let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
            let inner = (0.1 * rel).clamp(1e-3 * tol, 0.1);
            let (step, _) = pcg(
                self.hessian(&phi),
                |r| self.laplace.solve(r),
                &rhs,
                None,
                inner,
                1000,
                "poisson Newton CG",
            )?;
            let slope = dot(&grad, &step);
            // below this the energy cannot resolve the predicted decrease and
            // the full step is taken
            let resolvable = -slope > 1e-11 * energy.abs();
            let mut t = 1.0;
            let (trial, e_new) = loop {
                let trial: Vec<f64> = phi.iter().zip(&step).map(|(p, s)| p + t * s).collect();
                let e_new = self.energy(&trial, src);
                // at round-off level the energy can no longer resolve descent
                let flat = (energy - e_new).abs() <= 1e-14 * energy.abs();
                if e_new <= energy + 1e-4 * t * slope || flat || !resolvable {
                    break (trial, e_new);
                }
                t *= 0.5;
                if t < 1e-10 {
                    return Err(Error::SolverFailure {
                        solver: "poisson line search",
                        iterations,
                        residual: rel,
                    });
                }
            };
            phi = trial;
            energy = e_new;
            history.push(energy);
            grad = self.gradient(&phi, src);
            rel = self.dual_norm(&grad) / scale;
        }
        let (quad, quart, coupling) = self.identity_terms(&phi, src);
        Ok(PoissonSolution {
            phi: ScalarField::new(self.grid.clone(), phi)?,
            energy_value: energy,
            identity_residual: (quad + quart - coupling).abs() / coupling.abs(),
            optimality: rel,
            iterations,
            degenerate: false,
            energy_history: history,
        })
    }

    /// Solves `(ε⁻²K + βε⁻⁴Q(φ)) ψ = 2 M(u w)` by preconditioned CG.
    pub fn linearized(&self, u: &[f64], phi: &[f64], w: &[f64], tol: f64) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = (0..u.len())
            .map(|i| 2.0 * self.grid.mass(i) * u[i] * w[i])
            .collect();
        if rhs.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; u.len()]);
        }
        if self.params.beta == 0.0 {
            return Ok(self.laplace.solve(&rhs));
        }
        let (psi, _) = pcg(
            self.hessian(phi),
            |r| self.laplace.solve(r),
            &rhs,
            None,
            tol,
            1000,
            "linearized poisson CG",
        )?;
        Ok(psi)
    }

    /// `‖ψ‖²_{D^{1,2}} = ψᵀKψ`.
    pub fn d12_sq(&self, psi: &[f64]) -> f64 {
        dot(&stiffness(&self.grid, psi, self.far), psi)
    }
}

/// `φ_ε(u)` for the nodal source `u_sq = u²`.
pub fn solve_phi(u_sq: &ScalarField, params: &PoissonParams) -> Result<PoissonSolution> {
    PoissonOperator::new(u_sq.grid().clone(), *params)?.solve(u_sq)
}

/// `D_uφ_ε[w]` at `u`, given `phi = φ_ε(u)`.
pub fn linearized_phi(
    u: &ScalarField,
    phi: &ScalarField,
    w: &ScalarField,
    params: &PoissonParams,
) -> Result<ScalarField> {
    u.check_grid(phi)?;
    u.check_grid(w)?;
    let op = PoissonOperator::new(u.grid().clone(), *params)?;
    let psi = op.linearized(u.values(), phi.values(), w.values(), 0.01 * params.tol)?;
    ScalarField::new(u.grid().clone(), psi)
}

/// `‖φ‖_{D^{1,2}}` on the grid, with the far field used by the solver.
pub fn d12_norm(phi: &ScalarField) -> f64 {
    let g = phi.grid();
    dot(&stiffness(g, phi.values(), far_field(g)), phi.values()).max(0.0).sqrt()
}

#[cfg(test)]
mod tests;
