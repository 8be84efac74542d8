//! Rescaled, translated profiles `U_{ε,z}` and their tangent frames.

use std::sync::Arc;

use serde::Serialize;

use crate::discretization::stencil::{stiffness, FarField};
use crate::discretization::{dot, inner_h1, minres, FastSolver, Grid, ScalarField};
use crate::energy::PotentialSpec;
use crate::error::{Error, Result};
use crate::linalg::Ldlt;

use super::shoot::RadialProfile;

/// Profile mass that must lie inside the computational box.
const MIN_MASS_FRACTION: f64 = 1.0 - 1e-6;

/// `U_{ε,z} = λ^{2/(p−1)} U(λ|x − z|)` with `λ = V(εz)^{1/2}`.
#[derive(Debug, Clone)]
pub struct ScaledProfile {
    pub eps: f64,
    pub z: [f64; 3],
    pub lambda: f64,
    /// `∂λ/∂z_i = ε ∂_iV(εz) / (2λ)`
    pub dlambda: [f64; 3],
    prof: Arc<RadialProfile>,
}

fn dist(x: [f64; 3], z: [f64; 3]) -> f64 {
    ((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2) + (x[2] - z[2]).powi(2)).sqrt()
}

impl ScaledProfile {
    pub fn new(prof: Arc<RadialProfile>, eps: f64, z: [f64; 3], v: &PotentialSpec) -> Result<Self> {
        let x = z.map(|c| eps * c);
        let (val, grad, _) = v.eval(x);
        if !(val > 0.0) {
            return Err(Error::config(format!(
                "potential must be positive (inf V > 0); V({:?}) = {val}",
                x
            )));
        }
        let lambda = val.sqrt();
        Ok(Self {
            eps,
            z,
            lambda,
            dlambda: grad.map(|g| eps * g / (2.0 * lambda)),
            prof,
        })
    }

    pub fn profile(&self) -> &Arc<RadialProfile> {
        &self.prof
    }

    fn alpha(&self) -> f64 {
        2.0 / (self.prof.p - 1.0)
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        self.lambda.powf(self.alpha()) * self.prof.value(self.lambda * dist(x, self.z))
    }

    /// `d/dz_i U_{ε,z}(x)` for `i = 0, 1, 2`.
    pub fn z_derivative(&self, x: [f64; 3]) -> [f64; 3] {
        let a = self.alpha();
        let l = self.lambda;
        let rho = dist(x, self.z);
        let (u, du) = self.prof.eval(l * rho);
        let amp = l.powf(a);
        let dilation = a * l.powf(a - 1.0) * u + amp * du * rho;
        std::array::from_fn(|i| {
            let drho = if rho > 0.0 { -(x[i] - self.z[i]) / rho } else { 0.0 };
            amp * du * l * drho + self.dlambda[i] * dilation
        })
    }

    /// Fraction of `∫U_{ε,z}²` inside the grid, bounded below through the
    /// largest ball around `z` that the grid contains.
    pub fn mass_fraction_inside(&self, grid: &Grid) -> Result<f64> {
        let radius = match grid {
            Grid::Box(g) => g.distance_to_boundary(self.z),
            Grid::Radial(g) => {
                if self.z != [0.0; 3] {
                    return Err(Error::usage("radial grids only hold profiles centred at the origin"));
                }
                g.r_max() + 0.5 * g.h()
            }
        };
        if radius <= 0.0 {
            return Ok(0.0);
        }
        Ok(1.0 - self.prof.mass_fraction_outside(self.lambda * radius))
    }

    fn check_domain(&self, grid: &Grid) -> Result<()> {
        let fraction = self.mass_fraction_inside(grid)?;
        if fraction < MIN_MASS_FRACTION {
            return Err(Error::DomainTooSmall { fraction });
        }
        Ok(())
    }

    /// Samples the profile at the grid nodes.
    pub fn sample(&self, grid: &Arc<Grid>) -> Result<ScalarField> {
        self.check_domain(grid)?;
        Ok(ScalarField::from_fn(grid.clone(), |x| self.value(x)))
    }
}

/// Samples `λ^{2/(p−1)} U(λ|x − z|)` on `grid`.
pub fn scaled_profile(
    prof: &Arc<RadialProfile>,
    eps: f64,
    z: [f64; 3],
    v: &PotentialSpec,
    grid: &Arc<Grid>,
) -> Result<ScalarField> {
    ScaledProfile::new(prof.clone(), eps, z, v)?.sample(grid)
}

/// The fields `U̇_{ε,z,i}` and their H¹ Gram matrix.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub fields: [ScalarField; 3],
    pub gram: [[f64; 3]; 3],
    factor: Ldlt<3>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameDiagnostics {
    pub gram: [[f64; 3]; 3],
    pub condition: f64,
    pub max_off_diagonal: f64,
}

impl TangentFrame {
    /// Builds the frame from three fields; fails when the Gram matrix is
    /// numerically singular.
    pub fn from_fields(fields: [ScalarField; 3]) -> Result<Self> {
        let mut gram = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let g = inner_h1(&fields[i], &fields[j], None)?;
                gram[i][j] = g;
                gram[j][i] = g;
            }
        }
        let (vals, _) = crate::linalg::symmetric_eigen(&gram);
        let condition = if vals[0] > 0.0 { vals[2] / vals[0] } else { f64::INFINITY };
        if !(condition < 1e12) {
            return Err(Error::FrameDegenerate { condition });
        }
        let factor = Ldlt::new(&gram).ok_or(Error::FrameDegenerate { condition })?;
        Ok(Self { fields, gram, factor })
    }

    /// Solves `G c = b`.
    pub fn gram_solve(&self, b: &[f64; 3]) -> [f64; 3] {
        self.factor.solve(b)
    }

    pub fn diagnostics(&self) -> FrameDiagnostics {
        let (vals, _) = crate::linalg::symmetric_eigen(&self.gram);
        let mut off: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    off = off.max(self.gram[i][j].abs());
                }
            }
        }
        FrameDiagnostics {
            gram: self.gram,
            condition: vals[2] / vals[0],
            max_off_diagonal: off,
        }
    }
}

/// Analytic tangent frame `U̇_{ε,z,i} = ∂_{z_i} U_{ε,z}` on a box grid.
pub fn tangent_frame(
    prof: &Arc<RadialProfile>,
    eps: f64,
    z: [f64; 3],
    v: &PotentialSpec,
    grid: &Arc<Grid>,
) -> Result<TangentFrame> {
    if grid.as_box().is_none() {
        return Err(Error::usage("tangent frames need a box grid"));
    }
    let sp = ScaledProfile::new(prof.clone(), eps, z, v)?;
    sp.check_domain(grid)?;
    let d: Vec<[f64; 3]> = (0..grid.len()).map(|i| sp.z_derivative(grid.position(i))).collect();
    let fields = std::array::from_fn(|c| {
        ScalarField::new(grid.clone(), d.iter().map(|v| v[c]).collect()).expect("finite frame")
    });
    TangentFrame::from_fields(fields)
}

/// Averages a box field over the 48 symmetries of the cube about the grid
/// centre.
pub(crate) fn symmetrize_octahedral(grid: &Grid, f: &mut [f64]) {
    let Grid::Box(g) = grid else { return };
    let n = g.n();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let src = f.to_vec();
    for idx in 0..g.len() {
        let (i, j, k) = g.coords(idx);
        let c = [i, j, k];
        let mut acc = 0.0;
        for p in &perms {
            for flips in 0..8 {
                let mut q = [c[p[0]], c[p[1]], c[p[2]]];
                for (a, qa) in q.iter_mut().enumerate() {
                    if flips >> a & 1 == 1 {
                        *qa = n - 1 - *qa;
                    }
                }
                acc += src[g.index(q[0], q[1], q[2])];
            }
        }
        f[idx] = acc / 48.0;
    }
}

/// Newton history of [`discrete_ground_state`].
#[derive(Debug, Clone, Serialize)]
pub struct GroundStateReport {
    pub lambda: f64,
    pub newton_steps: usize,
    pub minres_iterations: usize,
    /// Final `‖F‖_{P⁻¹} / ‖M|u|^p‖_{P⁻¹}` with `P = K + λ²M`.
    pub relative_residual: f64,
}

/// Positive solution of the discrete problem `K u + λ² M u = M |u|^{p−1} u`
/// centred in `grid`, by Newton's method from the sampled profile.
///
/// The linearization is indefinite, so each step is solved by MINRES on
/// `P⁻¹J` in the `P` inner product, with `P = K + λ²M` inverted exactly.
pub fn discrete_ground_state(
    prof: &Arc<RadialProfile>,
    lambda: f64,
    grid: &Arc<Grid>,
    tol: f64,
) -> Result<(ScalarField, GroundStateReport)> {
    let center = match &**grid {
        Grid::Box(g) => g.center(),
        Grid::Radial(_) => [0.0; 3],
    };
    let v = PotentialSpec::constant(lambda * lambda);
    let sp = ScaledProfile::new(prof.clone(), 1.0, center, &v)?;
    let u = sp.sample(grid)?.into_values();
    ground_state_newton(prof.p, lambda, grid, u, tol)
}

/// Newton iteration of [`discrete_ground_state`] from a given start.
pub fn ground_state_newton(
    p: f64,
    lambda: f64,
    grid: &Arc<Grid>,
    mut u: Vec<f64>,
    tol: f64,
) -> Result<(ScalarField, GroundStateReport)> {
    let far = FarField::Dirichlet;
    let mass = grid.masses();
    let l2 = lambda * lambda;
    let pre = FastSolver::new(grid, 1.0, l2, far);
    let apply_p = |x: &[f64]| -> Vec<f64> {
        let mut y = stiffness(grid, x, far);
        for i in 0..y.len() {
            y[i] += l2 * mass[i] * x[i];
        }
        y
    };
    let mut report = GroundStateReport {
        lambda,
        newton_steps: 0,
        minres_iterations: 0,
        relative_residual: f64::INFINITY,
    };
    // absolute residual ‖F‖_{P⁻¹}, its scale ‖M|u|^p‖_{P⁻¹}, and P⁻¹F
    let residual = |u: &[f64]| -> (f64, f64, Vec<f64>) {
        let nl: Vec<f64> = u.iter().zip(&mass).map(|(x, m)| m * x.abs().powf(p - 1.0) * x).collect();
        let res: Vec<f64> = apply_p(u).iter().zip(&nl).map(|(a, b)| a - b).collect();
        let pres = pre.solve(&res);
        let pnl = pre.solve(&nl);
        (dot(&res, &pres).max(0.0).sqrt(), dot(&nl, &pnl).max(0.0).sqrt(), pres)
    };
    let (mut abs, mut scale, mut pres) = residual(&u);
    for step in 0..60 {
        let rel = abs / scale.max(f64::MIN_POSITIVE);
        report.relative_residual = rel;
        report.newton_steps = step;
        if rel <= tol {
            return Ok((ScalarField::new(grid.clone(), u)?, report));
        }
        let weight: Vec<f64> = u.iter().zip(&mass).map(|(x, m)| p * m * x.abs().powf(p - 1.0)).collect();
        let jac = |x: &[f64]| -> Vec<f64> {
            let mut y = apply_p(x);
            for i in 0..y.len() {
                y[i] -= weight[i] * x[i];
            }
            pre.solve(&y)
        };
        let inner = |a: &[f64], b: &[f64]| dot(&apply_p(a), b);
        let rhs: Vec<f64> = pres.iter().map(|v| -v).collect();
        let inner_tol = (0.1 * rel).clamp(1e-13, 1e-3);
        let (delta, stats) = minres(jac, inner, &rhs, inner_tol, 500, "ground-state MINRES")?;
        report.minres_iterations += stats.iterations;
        // backtrack on the residual norm
        let mut t = 1.0;
        loop {
            let mut trial: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + t * d).collect();
            symmetrize_octahedral(grid, &mut trial);
            let (a_new, s_new, p_new) = residual(&trial);
            if a_new < (1.0 - 1e-4 * t) * abs {
                u = trial;
                (abs, scale, pres) = (a_new, s_new, p_new);
                break;
            }
            t *= 0.5;
            if t < 1e-4 {
                return Err(Error::SolverFailure {
                    solver: "ground-state Newton line search",
                    iterations: step,
                    residual: rel,
                });
            }
        }
    }
    Err(Error::SolverFailure {
        solver: "ground-state Newton",
        iterations: 60,
        residual: report.relative_residual,
    })
}

/// `∂_λ Û` from the differentiated equation `J ∂_λÛ = −2λ M Û`, where `J` is
/// the linearization at the discrete ground state `u`.
pub fn ground_state_lambda_derivative(
    p: f64,
    lambda: f64,
    u: &ScalarField,
    tol: f64,
) -> Result<(ScalarField, usize)> {
    let grid = u.grid();
    let far = FarField::Dirichlet;
    let mass = grid.masses();
    let l2 = lambda * lambda;
    let pre = FastSolver::new(grid, 1.0, l2, far);
    let apply_p = |x: &[f64]| -> Vec<f64> {
        let mut y = stiffness(grid, x, far);
        for i in 0..y.len() {
            y[i] += l2 * mass[i] * x[i];
        }
        y
    };
    let weight: Vec<f64> = u
        .values()
        .iter()
        .zip(&mass)
        .map(|(x, m)| p * m * x.abs().powf(p - 1.0))
        .collect();
    let jac = |x: &[f64]| -> Vec<f64> {
        let mut y = apply_p(x);
        for i in 0..y.len() {
            y[i] -= weight[i] * x[i];
        }
        pre.solve(&y)
    };
    let inner = |a: &[f64], b: &[f64]| dot(&apply_p(a), b);
    let rhs: Vec<f64> = u.values().iter().zip(&mass).map(|(x, m)| -2.0 * lambda * m * x).collect();
    let rhs = pre.solve(&rhs);
    let (mut d, stats) = minres(jac, inner, &rhs, tol, 500, "ground-state lambda derivative")?;
    symmetrize_octahedral(grid, &mut d);
    Ok((ScalarField::new(grid.clone(), d)?, stats.iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::BoxGrid;
    use crate::profile::shoot_ground_state;

    fn prof() -> Arc<RadialProfile> {
        Arc::new(shoot_ground_state(3.0, 1e-12).unwrap())
    }

    #[test]
    fn constant_potential_frame_is_minus_gradient() {
        let prof = prof();
        let grid: Arc<Grid> = Arc::new(BoxGrid::new(8.0, 17).unwrap().into());
        let v = PotentialSpec::constant(4.0);
        let u = scaled_profile(&prof, 0.1, [0.0; 3], &v, &grid).unwrap();
        let mid = grid.as_box().unwrap().index(8, 8, 8);
        assert!((u.values()[mid] - 2.0 * prof.u0).abs() < 1e-12);
        let frame = tangent_frame(&prof, 0.1, [0.0; 3], &v, &grid).unwrap();
        let d = frame.diagnostics();
        assert!(d.max_off_diagonal < 1e-12 * d.gram[0][0]);
    }

    #[test]
    fn detects_small_domain() {
        let prof = prof();
        let grid: Arc<Grid> = Arc::new(BoxGrid::new(3.0, 9).unwrap().into());
        let v = PotentialSpec::constant(1.0);
        let err = scaled_profile(&prof, 0.1, [0.0; 3], &v, &grid).unwrap_err();
        assert!(matches!(err, Error::DomainTooSmall { .. }));
    }

    #[test]
    fn discrete_ground_state_converges() {
        // p = 3 is too sharply peaked for this spacing; p = 2 is not
        let prof = Arc::new(shoot_ground_state(2.0, 1e-12).unwrap());
        let grid: Arc<Grid> = Arc::new(BoxGrid::new(9.0, 47).unwrap().into());
        let (u, rep) = discrete_ground_state(&prof, 1.0, &grid, 1e-11).unwrap();
        assert!(rep.relative_residual <= 1e-11);
        let mid = grid.as_box().unwrap().index(23, 23, 23);
        assert!((u.values()[mid] / prof.u0 - 1.0).abs() < 0.05);
        assert!(u.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn lambda_derivative_matches_finite_differences() {
        let prof = Arc::new(shoot_ground_state(2.0, 1e-12).unwrap());
        let grid: Arc<Grid> = Arc::new(BoxGrid::new(9.0, 31).unwrap().into());
        let solve = |l: f64| discrete_ground_state(&prof, l, &grid, 1e-12).unwrap().0;
        let (d, _) = ground_state_lambda_derivative(2.0, 1.2, &solve(1.2), 1e-11).unwrap();
        let t = 1e-4;
        let fd = solve(1.2 + t).zip_map(&solve(1.2 - t), |a, b| (a - b) / (2.0 * t));
        let err = fd.zip_map(&d, |a, b| a - b).max_abs() / d.max_abs();
        assert!(err < 1e-6, "{err}");
    }
}
