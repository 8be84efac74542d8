//! Lyapunov–Schmidt reduction onto the manifold of translated ground states.
//!
//! Every site `z` gets its own box centred at `z`, so the ansatz `U_{ε,z}` is
//! the discrete ground state `Û_λ` with `λ = V(εz)^{1/2}` sitting on the same
//! node pattern for every `z`. Translations then act only through the
//! potential, and the discrete problem keeps the exact translation
//! invariance of the constant-potential case.

mod ground;

pub use ground::{GroundState, GroundStateCache};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::stencil::{stiffness, FarField};
use crate::discretization::{dot, lanczos_ritz_on, minres, BoxGrid, Centering, Grid, ScalarField};
use crate::energy::{Functional, Linearization, ProblemParams};
use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::profile::{profile_constants, ProfileConstants, RadialProfile, TangentFrame};

/// Loosest relative tolerance of the inner MINRES solves.
const INNER_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSettings {
    /// Half width of the moving box, in rescaled units.
    pub half_width: f64,
    /// Nodes per axis.
    pub n: usize,
    pub tol_aux: f64,
    pub tol_orth: f64,
    pub max_iter: usize,
    /// Step of the central differences in `z` used for `ẇ`.
    pub h_z: f64,
    pub eps_max: f64,
    pub ground_state_tol: f64,
    /// Relative tolerance of the inner Poisson solves in each action of `L`.
    pub hessian_tol: f64,
    /// Axes along which `∇J̃` is differenced; the others are reported as 0
    /// and must vanish by symmetry of the configuration.
    pub gradient_axes: [bool; 3],
}

impl Default for ReductionSettings {
    fn default() -> Self {
        Self {
            half_width: 9.0,
            n: 63,
            tol_aux: 1e-8,
            tol_orth: 1e-8,
            max_iter: 40,
            h_z: 1e-3,
            eps_max: 0.25,
            ground_state_tol: 1e-11,
            hessian_tol: 1e-3,
            gradient_axes: [true; 3],
        }
    }
}

impl ReductionSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || self.n < 5 {
            return Err(Error::config("reduction box needs half_width > 0 and n >= 5"));
        }
        if self.n % 2 == 0 {
            return Err(Error::config("reduction box needs an odd node count so the centre is a node"));
        }
        if !(self.tol_aux > 0.0 && self.tol_orth > 0.0 && self.h_z > 0.0 && self.hessian_tol > 0.0) {
            return Err(Error::config("reduction tolerances must be positive"));
        }
        if !(self.eps_max > 0.0 && self.eps_max < 1.0) {
            return Err(Error::config("eps_max must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Corrector `w_{ε,z}` with its multipliers and iteration history.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub w: ScalarField,
    /// `α = G⁻¹(⟨∇J(U+w)|U̇_i⟩)`
    pub alpha: [f64; 3],
    pub w_h1_norm: f64,
    /// `‖Π∇J(U+w)‖_{H¹}`
    pub aux_residual: f64,
    /// `‖∇J(U+w)‖_{H¹}`
    pub full_residual: f64,
    pub iterations: usize,
    /// Projected residual before each step, ending with the final one.
    pub residual_history: Vec<f64>,
    /// Largest `|⟨w|U̇_i⟩| / (‖w‖ ‖U̇_i‖)`.
    pub orthogonality: f64,
    /// `‖w‖ / (ε|∇V(εz)| + ε²)`
    pub bound_constant: f64,
    pub minres_iterations: usize,
    /// `∇J(U+w)`
    pub gradient: ScalarField,
}

impl ReductionResult {
    /// Largest ratio of consecutive residuals after the first step.
    pub fn contraction_ratio(&self) -> f64 {
        self.residual_history
            .windows(2)
            .skip(1)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedSample {
    pub eps: f64,
    /// Site in rescaled coordinates.
    pub z: [f64; 3],
    pub j_tilde: f64,
    /// `Ī_λ(Û_λ)` on the grid, the discrete counterpart of `C₀V(εz)^θ`.
    pub leading: f64,
    /// `C₀V(εz)^θ` from the continuum profile.
    pub leading_continuum: f64,
    pub expansion_error: f64,
    pub grad_j_tilde: [f64; 3],
    /// `ε a ∇V(εz)` with the grid value `a = ½‖Û_λ‖²_{L²}` of `θC₀V^{θ−1}`.
    pub predicted_grad: [f64; 3],
    pub w_norm: f64,
    pub iterations: usize,
}

impl ReducedSample {
    pub fn gradient_error(&self) -> f64 {
        (0..3)
            .map(|i| (self.grad_j_tilde[i] - self.predicted_grad[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A reduced value together with everything computed on the way.
#[derive(Debug, Clone)]
pub struct ReducedPoint {
    pub sample: ReducedSample,
    pub result: ReductionResult,
    /// `M_{ij} = ⟨U̇_i + ẇ_i | U̇_j⟩_{H¹}`
    pub constraint_matrix: [[f64; 3]; 3],
    pub frame_gram: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NaturalConstraintReport {
    pub eps: f64,
    pub z: [f64; 3],
    pub full_residual: f64,
    pub aux_residual: f64,
    pub grad_norm: f64,
    pub alpha: [f64; 3],
    pub matrix: [[f64; 3]; 3],
    pub min_singular_value: f64,
    pub min_gram_diagonal: f64,
}

/// Everything that depends on `(ε, z)` but not on `w`.
pub struct Site {
    pub eps: f64,
    pub z: [f64; 3],
    pub lambda: f64,
    /// `∂λ/∂z_i`
    pub dlambda: [f64; 3],
    pub grid: Arc<Grid>,
    pub ground: Arc<GroundState>,
    pub functional: Functional,
    /// `U_{ε,z}`
    pub u: ScalarField,
    pub frame: TangentFrame,
    /// `(K + M) U̇_i`, so that `⟨f|U̇_i⟩_{H¹} = f · frame_dual[i]`.
    frame_dual: [Vec<f64>; 3],
    lin: Linearization,
}

impl std::fmt::Debug for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Site")
            .field("eps", &self.eps)
            .field("z", &self.z)
            .field("lambda", &self.lambda)
            .finish()
    }
}

fn h1_dual(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let mut y = stiffness(grid, f, FarField::Dirichlet);
    for (i, v) in y.iter_mut().enumerate() {
        *v += grid.mass(i) * f[i];
    }
    y
}

pub(crate) fn h1(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    dot(&h1_dual(grid, a), b)
}

/// Central difference along `dir` with zero ghost values.
pub fn central_difference(grid: &BoxGrid, f: &[f64], dir: usize) -> Vec<f64> {
    let n = grid.n();
    let inv = 0.5 / grid.h();
    let stride = [n * n, n, 1][dir];
    (0..grid.len())
        .map(|idx| {
            let (i, j, k) = grid.coords(idx);
            let c = [i, j, k][dir];
            let hi = if c + 1 < n { f[idx + stride] } else { 0.0 };
            let lo = if c > 0 { f[idx - stride] } else { 0.0 };
            (hi - lo) * inv
        })
        .collect()
}

impl Site {
    /// `Π f` with the Gram solve of the frame.
    pub fn project(&self, f: &mut [f64]) {
        let b = [0, 1, 2].map(|i| dot(f, &self.frame_dual[i]));
        let c = self.frame.gram_solve(&b);
        for (i, ci) in c.iter().enumerate() {
            let e = self.frame.fields[i].values();
            f.iter_mut().zip(e).for_each(|(x, y)| *x -= ci * y);
        }
    }

    fn frame_coefficients(&self, f: &[f64]) -> [f64; 3] {
        [0, 1, 2].map(|i| dot(f, &self.frame_dual[i]))
    }

    /// `L w = Π A Π w` with `A` the Hessian at `U_{ε,z}`.
    pub fn apply_l(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut x = w.to_vec();
        self.project(&mut x);
        let mut y = self.functional.hessian_apply(&self.lin, &x)?;
        self.project(&mut y);
        Ok(y)
    }

    /// `‖∇J_ε(U_{ε,z})‖_{H¹}`
    pub fn ansatz_gradient_norm(&self) -> f64 {
        let dual = self.functional.dual_gradient(self.u.values(), self.lin.phi());
        dot(&dual, &self.functional.riesz(&dual)).max(0.0).sqrt()
    }

    /// Ritz values of `L` on `W` after `steps` Lanczos steps, with tight
    /// inner solves so that `L` is symmetric to round-off.
    pub fn l_ritz_values(&self, start: &[f64], steps: usize) -> Result<Vec<f64>> {
        let tight = self.tight_functional()?;
        let frame = |x: &mut [f64]| self.project(x);
        self.ritz_on(&tight, frame, start, steps)
    }

    /// Ritz values of the Hessian restricted to the H¹ complement of
    /// `span{U, U̇_1, U̇_2, U̇_3}`.
    pub fn complement_ritz_values(&self, start: &[f64], steps: usize) -> Result<Vec<f64>> {
        let grid = self.grid.clone();
        // Gram–Schmidt basis of the excluded span
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let spans = [
            self.u.values(),
            self.frame.fields[0].values(),
            self.frame.fields[1].values(),
            self.frame.fields[2].values(),
        ];
        for v in spans {
            let mut x = v.to_vec();
            for _ in 0..2 {
                for b in &basis {
                    let c = h1(&grid, &x, b);
                    x.iter_mut().zip(b).for_each(|(a, y)| *a -= c * y);
                }
            }
            let nrm = h1(&grid, &x, &x).sqrt();
            x.iter_mut().for_each(|a| *a /= nrm);
            basis.push(x);
        }
        let project = |x: &mut [f64]| {
            for b in &basis {
                let c = h1(&grid, x, b);
                x.iter_mut().zip(b).for_each(|(a, y)| *a -= c * y);
            }
        };
        let tight = self.tight_functional()?;
        self.ritz_on(&tight, project, start, steps)
    }

    fn tight_functional(&self) -> Result<Functional> {
        let params = ProblemParams {
            hessian_tol: 1e-12,
            ..self.functional.params().clone()
        };
        Functional::new(self.grid.clone(), params)
    }

    fn ritz_on(
        &self,
        functional: &Functional,
        project: impl Fn(&mut [f64]),
        start: &[f64],
        steps: usize,
    ) -> Result<Vec<f64>> {
        let mut s = start.to_vec();
        project(&mut s);
        let mut failure = None;
        let ritz = lanczos_ritz_on(
            |x| {
                let mut xx = x.to_vec();
                project(&mut xx);
                let mut y = match functional.hessian_apply(&self.lin, &xx) {
                    Ok(y) => y,
                    Err(e) => {
                        failure.get_or_insert(e);
                        vec![0.0; x.len()]
                    }
                };
                project(&mut y);
                y
            },
            |a, b| h1(&self.grid, a, b),
            &project,
            &s,
            steps,
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(ritz),
        }
    }
}

/// Drives the reduction for one potential, `(β, p)` and box layout.
pub struct Reducer {
    prof: Arc<RadialProfile>,
    constants: ProfileConstants,
    params: ProblemParams,
    settings: ReductionSettings,
    cache: GroundStateCache,
}

impl std::fmt::Debug for Reducer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Reducer")
            .field("params", &self.params)
            .field("settings", &self.settings)
            .finish()
    }
}

fn add3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

impl Reducer {
    /// `params.eps` is ignored; every call supplies its own `ε`.
    pub fn new(prof: Arc<RadialProfile>, params: ProblemParams, settings: ReductionSettings) -> Result<Self> {
        settings.validate()?;
        if (prof.p - params.p).abs() > 1e-12 {
            return Err(Error::config(format!(
                "profile was shot for p = {} but the problem has p = {}",
                prof.p, params.p
            )));
        }
        let reference: Arc<Grid> = Arc::new(BoxGrid::new(settings.half_width, settings.n)?.into());
        let cache = GroundStateCache::new(prof.clone(), reference, settings.ground_state_tol);
        Ok(Self {
            constants: profile_constants(&prof),
            prof,
            params,
            settings,
            cache,
        })
    }

    pub fn settings(&self) -> &ReductionSettings {
        &self.settings
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn profile(&self) -> &Arc<RadialProfile> {
        &self.prof
    }

    pub fn constants(&self) -> &ProfileConstants {
        &self.constants
    }

    pub fn ground_state(&self, lambda: f64) -> Result<Arc<GroundState>> {
        self.cache.get(lambda)
    }

    fn params_at(&self, eps: f64) -> Result<ProblemParams> {
        if !(eps > 0.0 && eps <= self.settings.eps_max) {
            return Err(Error::config(format!(
                "eps = {eps} is outside (0, {}] where the reduction is attempted",
                self.settings.eps_max
            )));
        }
        Ok(ProblemParams {
            eps,
            hessian_tol: self.settings.hessian_tol,
            ..self.params.clone()
        })
    }

    pub fn grid_at(&self, z: [f64; 3]) -> Result<Arc<Grid>> {
        let g = BoxGrid::with_center(self.settings.half_width, self.settings.n, z, Centering::Node)?;
        Ok(Arc::new(g.into()))
    }

    pub fn site(&self, eps: f64, z: [f64; 3]) -> Result<Site> {
        let params = self.params_at(eps)?;
        let (lambda, dlambda) = self.lambda_at(eps, z)?;
        let ground = self.cache.get(lambda)?;
        let grid = self.grid_at(z)?;
        let Grid::Box(bg) = &*grid else { unreachable!() };
        let [f0, f1, f2] = frame_from(bg, &ground, dlambda).map(|d| ScalarField::new(grid.clone(), d));
        let frame = TangentFrame::from_fields([f0?, f1?, f2?])?;
        let frame_dual = [0, 1, 2].map(|i| h1_dual(&grid, frame.fields[i].values()));
        let u = ScalarField::new(grid.clone(), ground.values.clone())?;
        let functional = Functional::new(grid.clone(), params)?;
        let lin = functional.linearize(&u)?;
        Ok(Site {
            eps,
            z,
            lambda,
            dlambda,
            grid,
            ground,
            functional,
            u,
            frame,
            frame_dual,
            lin,
        })
    }

    /// Chord iteration `w ← w − L⁻¹Π∇J(U + w)` from `start` (default 0).
    pub fn solve_auxiliary(&self, site: &Site, start: Option<&[f64]>) -> Result<ReductionResult> {
        let grid = &site.grid;
        let len = grid.len();
        let mut w = match start {
            Some(s) if s.len() == len => s.to_vec(),
            Some(_) => return Err(Error::usage("warm start has the wrong length")),
            None => vec![0.0; len],
        };
        site.project(&mut w);
        let tol = self.settings.tol_aux;
        let mut history = Vec::new();
        let mut increases = 0;
        let mut minres_total = 0;
        let mut iterations = 0;
        let mut prev_lin: Option<Linearization> = None;
        loop {
            let ubar: Vec<f64> = site.u.values().iter().zip(&w).map(|(a, b)| a + b).collect();
            let ubar = ScalarField::new(grid.clone(), ubar)?;
            let lin = site.functional.linearize_from(&ubar, Some(prev_lin.as_ref().unwrap_or(&site.lin)))?;
            let dual = site.functional.dual_gradient(ubar.values(), lin.phi());
            let gradient = site.functional.riesz(&dual);
            prev_lin = Some(lin);
            let mut r = gradient.clone();
            site.project(&mut r);
            let res = h1(grid, &r, &r).max(0.0).sqrt();
            if let Some(&prev) = history.last() {
                if res > prev {
                    increases += 1;
                } else {
                    increases = 0;
                }
            }
            history.push(res);
            if res <= tol {
                return Ok(self.finish(site, w, gradient, &dual, history, iterations, minres_total));
            }
            if increases >= 3 {
                return Err(Error::ContractionFailure {
                    iteration: iterations,
                    residual: res,
                });
            }
            if iterations == self.settings.max_iter {
                return Err(Error::SolverFailure {
                    solver: "auxiliary chord iteration",
                    iterations,
                    residual: res,
                });
            }
            iterations += 1;
            // the inner solve only has to beat the chord contraction; within
            // 10·tol_aux of the end this is the absolute target 0.1·tol_aux
            let inner_tol = (0.1 * tol / res).clamp(INNER_FLOOR, 0.1);
            let mut failure = None;
            let (delta, stats) = minres(
                |x| match site.apply_l(x) {
                    Ok(y) => y,
                    Err(e) => {
                        failure.get_or_insert(e);
                        vec![0.0; x.len()]
                    }
                },
                |a, b| h1(grid, a, b),
                &r,
                inner_tol,
                1000,
                "projected MINRES for L",
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            minres_total += stats.iterations;
            w.iter_mut().zip(&delta).for_each(|(a, d)| *a -= d);
            site.project(&mut w);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        site: &Site,
        w: Vec<f64>,
        gradient: Vec<f64>,
        dual: &[f64],
        history: Vec<f64>,
        iterations: usize,
        minres_iterations: usize,
    ) -> ReductionResult {
        let grid = &site.grid;
        let alpha = site.frame.gram_solve(&site.frame_coefficients(&gradient));
        let full = dot(dual, &gradient).max(0.0).sqrt();
        let w_norm = h1(grid, &w, &w).max(0.0).sqrt();
        let coef = site.frame_coefficients(&w);
        let orthogonality = if w_norm > 0.0 {
            (0..3)
                .map(|i| coef[i].abs() / (w_norm * site.frame.gram[i][i].sqrt()))
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        let eps = site.eps;
        let x = site.z.map(|c| eps * c);
        let gv = self.params.potential.gradient(x);
        let gnorm = (gv[0] * gv[0] + gv[1] * gv[1] + gv[2] * gv[2]).sqrt();
        ReductionResult {
            w: ScalarField::new(grid.clone(), w).expect("finite corrector"),
            alpha,
            w_h1_norm: w_norm,
            aux_residual: *history.last().unwrap_or(&0.0),
            full_residual: full,
            iterations,
            residual_history: history,
            orthogonality,
            bound_constant: w_norm / (eps * gnorm + eps * eps),
            minres_iterations,
            gradient: ScalarField::new(grid.clone(), gradient).expect("finite gradient"),
        }
    }

    /// `J̃_ε(z)`, its gradient and the expansion diagnostics.
    pub fn reduced_value(&self, eps: f64, z: [f64; 3]) -> Result<ReducedPoint> {
        let site = self.site(eps, z)?;
        let result = self.solve_auxiliary(&site, None)?;
        self.reduced_from(&site, result)
    }

    /// Completes [`Reducer::reduced_value`] for an already solved site.
    ///
    /// The box moves with `z`, so `J̃(z) = J_z(Û_λ(z) + w(z))` where `J_z`
    /// depends on `z` only through `V(ε(x + z))`. Its derivative is
    /// `½ε Σ m ∂_iV f² + ⟨∇J(f) | ∂_λÛ⟩ ∂_iλ + ⟨∇J(f) | ∂_i w⟩`, and the
    /// last term equals `−Σ_j α_j ⟨w | ∂_iU̇_j⟩` up to `‖Π∇J‖`, because
    /// `⟨w | U̇_j⟩ = 0` for every `z`. The `z`-derivatives of the frame are
    /// central differences with step `h_z`.
    pub fn reduced_from(&self, site: &Site, result: ReductionResult) -> Result<ReducedPoint> {
        let eps = site.eps;
        let z = site.z;
        let grid = &site.grid;
        let Grid::Box(bg) = &**grid else { unreachable!() };
        let ubar = site.u.zip_map(&result.w, |a, b| a + b);
        let j_tilde = site.functional.value(&ubar)?.total;
        let g = result.gradient.values();
        let w = result.w.values();
        let hz = self.settings.h_z;
        let f = ubar.values();
        let mut explicit = [0.0; 3];
        for (k, fk) in f.iter().enumerate() {
            let x = grid.position(k).map(|c| eps * c);
            let dv = self.params.potential.gradient(x);
            let c = 0.5 * eps * grid.mass(k) * fk * fk;
            for i in 0..3 {
                explicit[i] += c * dv[i];
            }
        }
        let along_lambda = h1(grid, g, &site.ground.dlambda);
        let gram = site.frame.gram;
        let mut grad = [0.0; 3];
        let mut matrix = [[0.0; 3]; 3];
        for i in 0..3 {
            let dw = central_difference(bg, w, i);
            // ⟨D_i w | U̇_j⟩
            let shift = site.frame_coefficients(&dw);
            if !self.settings.gradient_axes[i] {
                matrix[i] = [0, 1, 2].map(|j| gram[i][j] - shift[j]);
                continue;
            }
            let plus = self.frame_values(bg, eps, add3(z, unit(i), hz))?;
            let minus = self.frame_values(bg, eps, add3(z, unit(i), -hz))?;
            // ⟨w | ∂_iU̇_j⟩
            let bend = [0, 1, 2].map(|j| {
                let d: Vec<f64> = plus[j].iter().zip(&minus[j]).map(|(a, b)| (a - b) / (2.0 * hz)).collect();
                h1(grid, w, &d)
            });
            matrix[i] = [0, 1, 2].map(|j| gram[i][j] - bend[j] - shift[j]);
            let coupled: f64 = (0..3).map(|j| result.alpha[j] * bend[j]).sum();
            grad[i] = explicit[i] + site.dlambda[i] * along_lambda - coupled;
        }
        let x = z.map(|c| eps * c);
        let (v, dv, _) = self.params.potential.eval(x);
        let leading = site.ground.ibar;
        let sample = ReducedSample {
            eps,
            z,
            j_tilde,
            leading,
            leading_continuum: self.constants.leading(v),
            expansion_error: (j_tilde - leading).abs(),
            grad_j_tilde: grad,
            predicted_grad: dv.map(|d| eps * site.ground.half_mass * d),
            w_norm: result.w_h1_norm,
            iterations: result.iterations,
        };
        Ok(ReducedPoint {
            sample,
            result,
            constraint_matrix: matrix,
            frame_gram: gram,
        })
    }

    /// Node values of `U̇_{ε,z,i} = −D_iÛ_λ + ∂_iλ ∂_λÛ_λ` on the moving box.
    fn frame_values(&self, bg: &BoxGrid, eps: f64, z: [f64; 3]) -> Result<[Vec<f64>; 3]> {
        let (lambda, dlambda) = self.lambda_at(eps, z)?;
        let ground = self.cache.get(lambda)?;
        Ok(frame_from(bg, &ground, dlambda))
    }

    fn lambda_at(&self, eps: f64, z: [f64; 3]) -> Result<(f64, [f64; 3])> {
        let x = [eps * z[0], eps * z[1], eps * z[2]];
        let (v, dv, _) = self.params.potential.eval(x);
        if !(v > 0.0) {
            return Err(Error::config(format!("potential is not positive at x = {x:?}")));
        }
        let lambda = v.sqrt();
        Ok((lambda, dv.map(|d| eps * d / (2.0 * lambda))))
    }

    /// Full residual at an approximate critical point of `J̃_ε`, with the
    /// matrix `M` whose invertibility turns `∇J̃ = 0` into `α = 0`.
    pub fn check_natural_constraint(&self, eps: f64, z_star: [f64; 3]) -> Result<NaturalConstraintReport> {
        let pt = self.reduced_value(eps, z_star)?;
        Ok(natural_constraint_report(&pt))
    }
}

pub fn natural_constraint_report(pt: &ReducedPoint) -> NaturalConstraintReport {
    let s = &pt.sample;
    let sv = singular_values(&pt.constraint_matrix);
    let min_sv = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_diag = (0..3).map(|i| pt.frame_gram[i][i]).fold(f64::INFINITY, f64::min);
    NaturalConstraintReport {
        eps: s.eps,
        z: s.z,
        full_residual: pt.result.full_residual,
        aux_residual: pt.result.aux_residual,
        grad_norm: s.grad_j_tilde.iter().map(|g| g * g).sum::<f64>().sqrt(),
        alpha: pt.result.alpha,
        matrix: pt.constraint_matrix,
        min_singular_value: min_sv,
        min_gram_diagonal: min_diag,
    }
}

fn frame_from(bg: &BoxGrid, ground: &GroundState, dlambda: [f64; 3]) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|i| {
        let mut d = central_difference(bg, &ground.values, i);
        d.iter_mut()
            .zip(&ground.dlambda)
            .for_each(|(a, b)| *a = -*a + dlambda[i] * b);
        d
    })
}

fn unit(i: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[i] = 1.0;
    e
}

/// `f − Σ c_i U̇_i` with `G c = (⟨f|U̇_i⟩_{H¹})`.
pub fn project_w(f: &ScalarField, frame: &TangentFrame) -> Result<ScalarField> {
    let grid = f.grid();
    for e in &frame.fields {
        f.check_grid(e)?;
    }
    let b = [0, 1, 2].map(|i| h1(grid, f.values(), frame.fields[i].values()));
    let c = frame.gram_solve(&b);
    let mut out = f.clone();
    for (i, ci) in c.iter().enumerate() {
        out.axpy(-ci, &frame.fields[i]);
    }
    Ok(out)
}

/// `Π A Π w` with `A` the H¹ Hessian of `J_ε` at `u_base`.
pub fn apply_l(
    w: &ScalarField,
    u_base: &ScalarField,
    frame: &TangentFrame,
    params: &ProblemParams,
) -> Result<ScalarField> {
    let f = Functional::new(u_base.grid().clone(), params.clone())?;
    let lin = f.linearize(u_base)?;
    let pw = project_w(w, frame)?;
    let aw = ScalarField::new(u_base.grid().clone(), f.hessian_apply(&lin, pw.values())?)?;
    project_w(&aw, frame)
}
