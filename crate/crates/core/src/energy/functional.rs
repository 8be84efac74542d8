use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::stencil::{stiffness, FarField};
use crate::discretization::{dot, FastSolver, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::quasipoisson::{PoissonOperator, PoissonParams, PoissonSolution};

use super::PotentialSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub eps: f64,
    pub beta: f64,
    pub p: f64,
    pub potential: PotentialSpec,
    /// When false the potential `φ` is dropped and `J` reduces to the plain
    /// Schrödinger energy.
    pub coupling: bool,
    pub poisson_tol: f64,
    /// Relative CG tolerance for `D_uφ_ε[w]` inside Hessian actions.
    pub hessian_tol: f64,
}

impl ProblemParams {
    pub fn new(eps: f64, beta: f64, p: f64, potential: PotentialSpec) -> Self {
        Self {
            eps,
            beta,
            p,
            potential,
            coupling: true,
            poisson_tol: 1e-10,
            hessian_tol: 1e-12,
        }
    }

    pub fn uncoupled(mut self) -> Self {
        self.coupling = false;
        self
    }

    pub fn poisson(&self) -> PoissonParams {
        PoissonParams {
            tol: self.poisson_tol,
            ..PoissonParams::new(self.eps, self.beta)
        }
    }

    /// Range checks plus positivity of `V(εx)` at every node of `grid`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.poisson().validate()?;
        if !(self.hessian_tol > 0.0 && self.hessian_tol < 1.0) {
            return Err(Error::config("hessian_tol must lie in (0, 1)"));
        }
        if !(self.p > 1.0 && self.p < 5.0) {
            return Err(Error::config(format!("p must lie in (1, 5), got {}", self.p)));
        }
        let v_min = (0..grid.len())
            .map(|i| self.potential.value(scaled(self.eps, grid.position(i))))
            .fold(f64::INFINITY, f64::min);
        if !(v_min > 0.0) {
            return Err(Error::config(format!(
                "potential must have a positive infimum on the sampled domain, found min V = {v_min}"
            )));
        }
        Ok(())
    }
}

fn scaled(eps: f64, x: [f64; 3]) -> [f64; 3] {
    [eps * x[0], eps * x[1], eps * x[2]]
}

/// Term-wise values of `J_ε(u)`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EnergyBreakdown {
    /// `½‖u‖²_{H¹_ε} = ½∫|∇u|² + V(εx)u²`
    pub quadratic: f64,
    /// `(3/8)∫φu²`
    pub phi_source: f64,
    /// `−‖φ‖²_{D^{1,2}} / (8ε²)`
    pub phi_field: f64,
    /// `−‖u‖^{p+1}_{p+1} / (p+1)`
    pub nonlinear: f64,
    /// Sum of the four terms.
    pub total: f64,
    /// Set for `u ≡ 0`, where `J = 0` and nothing is solved.
    pub degenerate: bool,
}

/// Discrete `J_ε` on one grid, with the operators it needs kept ready.
pub struct Functional {
    grid: Arc<Grid>,
    params: ProblemParams,
    v_eps: Vec<f64>,
    poisson: Option<PoissonOperator>,
    riesz: FastSolver,
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Functional").field("params", &self.params).finish()
    }
}

/// `φ_ε(u)` with `u`, ready for repeated Hessian actions.
#[derive(Debug, Clone)]
pub struct Linearization {
    u: Vec<f64>,
    phi: Vec<f64>,
    /// `p|u|^{p−1}`
    weight: Vec<f64>,
}

impl Linearization {
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

const FAR: FarField = FarField::Dirichlet;

impl Functional {
    pub fn new(grid: Arc<Grid>, params: ProblemParams) -> Result<Self> {
        params.validate(&grid)?;
        let v_eps = (0..grid.len())
            .map(|i| params.potential.value(scaled(params.eps, grid.position(i))))
            .collect();
        let poisson = if params.coupling {
            Some(PoissonOperator::new(grid.clone(), params.poisson())?)
        } else {
            None
        };
        let riesz = FastSolver::new(&grid, 1.0, 1.0, FAR);
        Ok(Self {
            grid,
            params,
            v_eps,
            poisson,
            riesz,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    /// `V(εx)` at the nodes.
    pub fn potential_values(&self) -> &[f64] {
        &self.v_eps
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if u.grid().as_ref() != self.grid.as_ref() {
            return Err(Error::usage("field and functional live on different grids"));
        }
        Ok(())
    }

    /// `φ_ε(u)`, or `None` when the coupling is off.
    pub fn potential_of(&self, u: &[f64]) -> Result<Option<PoissonSolution>> {
        self.potential_from(u, None)
    }

    fn potential_from(&self, u: &[f64], start: Option<&[f64]>) -> Result<Option<PoissonSolution>> {
        match &self.poisson {
            None => Ok(None),
            Some(op) => {
                let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
                op.solve_source_from(&sq, start).map(Some)
            }
        }
    }

    pub fn value(&self, u: &ScalarField) -> Result<EnergyBreakdown> {
        self.check(u)?;
        if u.is_zero() {
            return Ok(EnergyBreakdown {
                degenerate: true,
                ..Default::default()
            });
        }
        let g = &*self.grid;
        let uv = u.values();
        let p = self.params.p;
        let ku = stiffness(g, uv, FAR);
        let mut quadratic = 0.5 * dot(&ku, uv);
        let mut nl = 0.0;
        for (i, &x) in uv.iter().enumerate() {
            let m = g.mass(i);
            quadratic += 0.5 * m * self.v_eps[i] * x * x;
            nl += m * x.abs().powf(p + 1.0);
        }
        let nonlinear = -nl / (p + 1.0);
        let (phi_source, phi_field) = match self.potential_of(uv)? {
            None => (0.0, 0.0),
            Some(sol) => {
                let phi = sol.phi.values();
                let src: f64 = (0..uv.len()).map(|i| g.mass(i) * phi[i] * uv[i] * uv[i]).sum();
                let d12 = self.poisson.as_ref().map_or(0.0, |op| op.d12_sq(phi));
                (0.375 * src, -d12 / (8.0 * self.params.eps * self.params.eps))
            }
        };
        Ok(EnergyBreakdown {
            quadratic,
            phi_source,
            phi_field,
            nonlinear,
            total: quadratic + phi_source + phi_field + nonlinear,
            degenerate: false,
        })
    }

    /// `D_uJ_ε` as a nodal dual vector, given `φ = φ_ε(u)` (empty when the
    /// coupling is off).
    pub fn dual_gradient(&self, u: &[f64], phi: &[f64]) -> Vec<f64> {
        let g = &*self.grid;
        let p = self.params.p;
        let mut r = stiffness(g, u, FAR);
        for (i, ri) in r.iter_mut().enumerate() {
            let x = u[i];
            let phi_i = if phi.is_empty() { 0.0 } else { phi[i] };
            *ri += g.mass(i) * ((self.v_eps[i] + phi_i) * x - x.abs().powf(p - 1.0) * x);
        }
        r
    }

    /// H¹ Riesz representative of a nodal dual vector.
    pub fn riesz(&self, dual: &[f64]) -> Vec<f64> {
        self.riesz.solve(dual)
    }

    pub fn linearize(&self, u: &ScalarField) -> Result<Linearization> {
        self.linearize_from(u, None)
    }

    /// As [`Functional::linearize`], with the Poisson solve started from the
    /// potential of a nearby linearization.
    pub fn linearize_from(&self, u: &ScalarField, near: Option<&Linearization>) -> Result<Linearization> {
        self.check(u)?;
        if u.is_zero() {
            return Err(Error::usage("J is not differentiable at u = 0"));
        }
        let start = near.map(|l| l.phi.as_slice()).filter(|p| p.len() == u.len());
        let phi = self
            .potential_from(u.values(), start)?
            .map(|s| s.phi.into_values())
            .unwrap_or_default();
        let p = self.params.p;
        Ok(Linearization {
            u: u.values().to_vec(),
            weight: u.values().iter().map(|x| p * x.abs().powf(p - 1.0)).collect(),
            phi,
        })
    }

    /// `∇J_ε(u)` for a prepared linearization.
    pub fn gradient_at(&self, lin: &Linearization) -> Vec<f64> {
        self.riesz(&self.dual_gradient(&lin.u, &lin.phi))
    }

    /// `D²J_ε(u)[w, ·]` as a nodal dual vector.
    pub fn dual_hessian(&self, lin: &Linearization, w: &[f64]) -> Result<Vec<f64>> {
        let g = &*self.grid;
        let mut r = stiffness(g, w, FAR);
        let psi = match &self.poisson {
            Some(op) => op.linearized(&lin.u, &lin.phi, w, self.params.hessian_tol)?,
            None => Vec::new(),
        };
        for (i, ri) in r.iter_mut().enumerate() {
            let mut c = (self.v_eps[i] - lin.weight[i]) * w[i];
            if !psi.is_empty() {
                c += psi[i] * lin.u[i] + lin.phi[i] * w[i];
            }
            *ri += g.mass(i) * c;
        }
        Ok(r)
    }

    /// H¹ Riesz representative of `D²J_ε(u)[w, ·]`.
    pub fn hessian_apply(&self, lin: &Linearization, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.riesz(&self.dual_hessian(lin, w)?))
    }
}

/// `J_ε(u)` with its term-wise breakdown.
pub fn j_eps(u: &ScalarField, params: &ProblemParams) -> Result<EnergyBreakdown> {
    Functional::new(u.grid().clone(), params.clone())?.value(u)
}

/// The H¹ gradient of `J_ε` at `u`.
pub fn grad_j_eps(u: &ScalarField, params: &ProblemParams) -> Result<ScalarField> {
    let f = Functional::new(u.grid().clone(), params.clone())?;
    let lin = f.linearize(u)?;
    ScalarField::new(u.grid().clone(), f.gradient_at(&lin))
}

/// The H¹ representative of `D²J_ε(u)[w, ·]`.
pub fn hess_j_eps_apply(u: &ScalarField, w: &ScalarField, params: &ProblemParams) -> Result<ScalarField> {
    u.check_grid(w)?;
    let f = Functional::new(u.grid().clone(), params.clone())?;
    let lin = f.linearize(u)?;
    ScalarField::new(u.grid().clone(), f.hessian_apply(&lin, w.values())?)
}

/// `Ī_λ(u) = ½‖∇u‖² + ½λ²‖u‖² − ‖u‖^{p+1}_{p+1}/(p+1)`.
pub fn i_bar(u: &ScalarField, lambda: f64, p: f64) -> f64 {
    let g = u.grid();
    let uv = u.values();
    let mut e = 0.5 * dot(&stiffness(g, uv, FAR), uv);
    for (i, &x) in uv.iter().enumerate() {
        let m = g.mass(i);
        e += m * (0.5 * lambda * lambda * x * x - x.abs().powf(p + 1.0) / (p + 1.0));
    }
    e
}
