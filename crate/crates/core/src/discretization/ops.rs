//! Public differential operators, inner products and the H¹ Riesz map.
//!
//! Fields vanish outside the grid (zero ghost layer), so every operator here
//! is the nodal form of a symmetric edge-based bilinear form divided by the
//! node masses. That keeps discrete integration by parts exact.

use std::sync::Arc;

use crate::error::{Error, Result};

use super::fast_solve::FastSolver;
use super::field::{ScalarField, VectorField};
use super::grid::Grid;
use super::krylov::{pcg, KrylovStats};
use super::stencil::{
    edge_dot, node_average, slopes, slopes_transpose, spread_to_edges, stiffness, FarField,
};

fn check_size(grid: &Grid) -> Result<()> {
    if let Grid::Box(g) = grid {
        if g.n() < 3 {
            return Err(Error::config("box grid needs at least 3 nodes per axis"));
        }
    }
    Ok(())
}

/// Discrete Laplacian `Δf` with zero values outside the grid.
///
/// On box grids this is the 7-point stencil. On radial grids it is the
/// finite-volume form of `f'' + 2f'/r`, which reduces to `3f''(0)` at the
/// origin.
pub fn laplacian_apply(f: &ScalarField) -> Result<ScalarField> {
    let grid = f.grid();
    check_size(grid)?;
    let kf = stiffness(grid, f.values(), FarField::Dirichlet);
    let values = kf
        .iter()
        .enumerate()
        .map(|(i, v)| -v / grid.mass(i))
        .collect();
    Ok(ScalarField::from_vec(grid.clone(), values))
}

/// Centered-difference gradient; one-sided at the outermost nodes.
///
/// Radial grids return the single component `f'(r)` with `f'(0) = 0`.
pub fn grad(f: &ScalarField) -> VectorField {
    let grid = f.grid().clone();
    let v = f.values();
    let comps = match &*grid {
        Grid::Radial(g) => {
            let n = g.n();
            let h = g.h();
            let d = (0..n)
                .map(|j| {
                    if j == 0 {
                        0.0
                    } else if j + 1 < n {
                        (v[j + 1] - v[j - 1]) / (2.0 * h)
                    } else {
                        (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2]) / (2.0 * h)
                    }
                })
                .collect();
            vec![d]
        }
        Grid::Box(g) => {
            let n = g.n();
            let h = g.h();
            let strides = [n * n, n, 1];
            (0..3)
                .map(|dir| {
                    let s = strides[dir];
                    (0..g.len())
                        .map(|idx| {
                            let c = g.coords(idx);
                            let i = [c.0, c.1, c.2][dir];
                            if i == 0 {
                                (-3.0 * v[idx] + 4.0 * v[idx + s] - v[idx + 2 * s]) / (2.0 * h)
                            } else if i + 1 == n {
                                (3.0 * v[idx] - 4.0 * v[idx - s] + v[idx - 2 * s]) / (2.0 * h)
                            } else {
                                (v[idx + s] - v[idx - s]) / (2.0 * h)
                            }
                        })
                        .collect()
                })
                .collect()
        }
    };
    VectorField::new(grid, comps).expect("component layout matches grid")
}

/// Edge fluxes `κ ⊙ Bφ` of the quartic energy `¼ Σ m |∇φ|⁴`, where the
/// nodal `|∇φ|²` is the edge average of squared slopes.
pub(crate) fn p4_flux(grid: &Grid, bphi: &[f64], far: FarField) -> Vec<f64> {
    let s = node_average(grid, bphi, bphi, far);
    let kappa = spread_to_edges(grid, &s, far);
    kappa.iter().zip(bphi).map(|(k, b)| k * b).collect()
}

/// Quartic energy `Σ m |∇φ|⁴` (without the factor ¼).
pub(crate) fn quartic_sum(grid: &Grid, bphi: &[f64], far: FarField) -> f64 {
    let s = node_average(grid, bphi, bphi, far);
    s.iter().enumerate().map(|(i, v)| grid.mass(i) * v * v).sum()
}

/// Discrete 4-Laplacian `∇·(|∇φ|²∇φ)`.
///
/// Computed in flux form as `−M⁻¹ Bᵀ(κ ⊙ Bφ)`, which is exactly minus the
/// mass-scaled gradient of the discrete quartic energy `¼ Σ m |∇φ|⁴`.
pub fn div_p4(phi: &ScalarField) -> ScalarField {
    let grid = phi.grid();
    let far = FarField::Dirichlet;
    let b = slopes(grid, phi.values(), far);
    let flux = p4_flux(grid, &b, far);
    let out = slopes_transpose(grid, &flux, far);
    let values = out
        .iter()
        .enumerate()
        .map(|(i, v)| -v / grid.mass(i))
        .collect();
    ScalarField::from_vec(grid.clone(), values)
}

/// `∫ ∇f·∇g + weight·f·g`; the weight defaults to 1.
pub fn inner_h1(f: &ScalarField, g: &ScalarField, weight: Option<&ScalarField>) -> Result<f64> {
    f.check_grid(g)?;
    if let Some(w) = weight {
        f.check_grid(w)?;
    }
    let grid = f.grid();
    let (a, b) = (f.values(), g.values());
    let grad_part = h1_grad_part(grid, a, b);
    let mass_part: f64 = match weight {
        None => (0..a.len()).map(|i| grid.mass(i) * a[i] * b[i]).sum(),
        Some(w) => {
            let w = w.values();
            (0..a.len()).map(|i| grid.mass(i) * w[i] * a[i] * b[i]).sum()
        }
    };
    Ok(grad_part + mass_part)
}

fn h1_grad_part(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let far = FarField::Dirichlet;
    match grid {
        // the stiffness sweep is cheaper than building edge arrays
        Grid::Box(_) => stiffness(grid, a, far).iter().zip(b).map(|(x, y)| x * y).sum(),
        Grid::Radial(_) => edge_dot(grid, &slopes(grid, a, far), &slopes(grid, b, far)),
    }
}

/// `(∫|f|^q)^{1/q}` by the grid quadrature.
pub fn norm_lq(f: &ScalarField, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::usage(format!("L^q norm needs finite q >= 1, got {q}")));
    }
    let grid = f.grid();
    let s: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| grid.mass(i) * v.abs().powf(q))
        .sum();
    Ok(s.powf(1.0 / q))
}

/// Solves `(K + M) g = dual` for a nodal functional `dual`, i.e. returns the
/// H¹ representative of `w ↦ dualᵀw`.
pub(crate) fn riesz_dual(
    grid: &Arc<Grid>,
    dual: &[f64],
    tol: f64,
    solver: Option<&FastSolver>,
) -> Result<(Vec<f64>, KrylovStats)> {
    let owned;
    let pre = match solver {
        Some(s) => s,
        None => {
            owned = FastSolver::new(grid, 1.0, 1.0, FarField::Dirichlet);
            &owned
        }
    };
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = stiffness(grid, x, FarField::Dirichlet);
        for (i, v) in y.iter_mut().enumerate() {
            *v += grid.mass(i) * x[i];
        }
        y
    };
    pcg(apply, |r| pre.solve(r), dual, None, tol, 500, "riesz CG")
}

/// H¹ Riesz representative of `w ↦ ∫ residual·w`: solves `(−Δ+1) g =
/// residual` by conjugate gradients, with a fast direct solve of the same
/// operator as preconditioner.
pub fn riesz_h1_solve(residual: &ScalarField, tol: f64) -> Result<ScalarField> {
    if !(tol > 0.0) {
        return Err(Error::usage("riesz solve needs tol > 0"));
    }
    let grid = residual.grid();
    let dual: Vec<f64> = residual
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| grid.mass(i) * v)
        .collect();
    let (g, _) = riesz_dual(grid, &dual, tol, None)?;
    Ok(ScalarField::from_vec(grid.clone(), g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::grid::{BoxGrid, RadialGrid};

    fn box_grid(hw: f64, n: usize) -> Arc<Grid> {
        Arc::new(Grid::Box(BoxGrid::new(hw, n).unwrap()))
    }

    fn interior(g: &BoxGrid, idx: usize) -> bool {
        let (i, j, k) = g.coords(idx);
        let n = g.n();
        [i, j, k].iter().all(|&c| c > 0 && c + 1 < n)
    }

    #[test]
    fn laplacian_of_quadratic_is_six() {
        let grid = box_grid(2.0, 9);
        let f = ScalarField::from_fn(grid.clone(), |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        let lap = laplacian_apply(&f).unwrap();
        let g = grid.as_box().unwrap();
        for idx in 0..g.len() {
            if interior(g, idx) {
                assert!((lap.values()[idx] - 6.0).abs() < 1e-10);
            }
        }
        let r = Arc::new(Grid::Radial(RadialGrid::new(3.0, 31).unwrap()));
        let f = ScalarField::from_fn(r.clone(), |x| x[0] * x[0]);
        let lap = laplacian_apply(&f).unwrap();
        for j in 0..30 {
            assert!((lap.values()[j] - 6.0).abs() < 1e-9, "{j}");
        }
    }

    #[test]
    fn gradient_is_exact_on_quadratics() {
        let grid = box_grid(2.0, 9);
        let f = ScalarField::from_fn(grid.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
        let g = grad(&f);
        for idx in 0..grid.len() {
            let p = grid.position(idx);
            for c in 0..3 {
                assert!((g.component(c)[idx] - p[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn p4_of_linear_field_vanishes_inside() {
        let grid = box_grid(2.0, 9);
        let f = ScalarField::from_fn(grid.clone(), |x| x[0]);
        let d = div_p4(&f);
        let g = grid.as_box().unwrap();
        for idx in 0..g.len() {
            let (i, j, k) = g.coords(idx);
            let deep = [i, j, k].iter().all(|&c| c > 1 && c + 2 < g.n());
            if deep {
                assert!(d.values()[idx].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn riesz_inverts_the_forward_map() {
        let grid = box_grid(3.0, 11);
        let w = ScalarField::from_fn(grid.clone(), |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let lap = laplacian_apply(&w).unwrap();
        let rhs = w.zip_map(&lap, |a, l| a - l);
        let g = riesz_h1_solve(&rhs, 1e-12).unwrap();
        assert!((&g - &w).max_abs() < 1e-9);
    }

    #[test]
    fn plateau_norm() {
        let grid = box_grid(1.0, 3);
        let f = ScalarField::constant(grid, 1.0);
        // 27 nodes of mass 1 each
        assert!((norm_lq(&f, 2.0).unwrap() - 27f64.sqrt()).abs() < 1e-12);
        assert!(norm_lq(&f, 0.5).is_err());
    }
}
