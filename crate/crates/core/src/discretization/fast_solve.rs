//! Direct solvers for `(a K + b M) x = d`, used as exact inverses and as
//! preconditioners. Box grids diagonalize in the discrete sine basis; radial
//! grids give a tridiagonal system.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, Dst1};

use super::grid::{BoxGrid, Grid, RadialGrid};
use super::stencil::{monopole_coefficient, FarField};

enum Kind {
    Box {
        n: usize,
        dst: Arc<dyn Dst1<f64>>,
        inv_eig: Vec<f64>,
    },
    Radial {
        lower: Vec<f64>,
        diag: Vec<f64>,
        upper: Vec<f64>,
    },
}

/// Exact solver for the constant-coefficient operator `a K + b M`.
pub struct FastSolver {
    kind: Kind,
}

impl std::fmt::Debug for FastSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.kind {
            Kind::Box { .. } => "box",
            Kind::Radial { .. } => "radial",
        };
        f.debug_struct("FastSolver").field("kind", &name).finish()
    }
}

impl FastSolver {
    /// Requires `a > 0`, `b >= 0`.
    pub fn new(grid: &Grid, a: f64, b: f64, far: FarField) -> Self {
        assert!(a > 0.0 && b >= 0.0, "operator must be positive definite");
        let kind = match grid {
            Grid::Box(g) => Self::box_kind(g, a, b),
            Grid::Radial(g) => Self::radial_kind(g, a, b, far),
        };
        Self { kind }
    }

    fn box_kind(g: &BoxGrid, a: f64, b: f64) -> Kind {
        let n = g.n();
        let h = g.h();
        let mut planner = DctPlanner::new();
        let dst = planner.plan_dst1(n);
        let mu: Vec<f64> = (0..n)
            .map(|k| (2.0 - 2.0 * (PI * (k + 1) as f64 / (n + 1) as f64).cos()) / (h * h))
            .collect();
        let vol = h * h * h;
        let norm = (2.0 / (n + 1) as f64).powi(3);
        let mut inv_eig = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lam = vol * (a * (mu[i] + mu[j] + mu[k]) + b);
                    inv_eig[(i * n + j) * n + k] = norm / lam;
                }
            }
        }
        Kind::Box { n, dst, inv_eig }
    }

    fn radial_kind(g: &RadialGrid, a: f64, b: f64, far: FarField) -> Kind {
        let n = g.n();
        let h2 = g.h() * g.h();
        let mut diag: Vec<f64> = (0..n).map(|j| b * g.volume(j)).collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for e in 1..=n {
            let r = (e as f64 - 0.5) * g.h();
            let w = a * 4.0 * PI * r * r * g.h() / h2;
            if e == n {
                if far == FarField::Dirichlet {
                    diag[n - 1] += w;
                }
                break;
            }
            diag[e - 1] += w;
            diag[e] += w;
            upper[e - 1] = -w;
            lower[e] = -w;
        }
        if far == FarField::Monopole {
            diag[n - 1] += a * monopole_coefficient(g);
        }
        Kind::Radial { lower, diag, upper }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Box { n, dst, inv_eig } => {
                let mut x = rhs.to_vec();
                dst3(&mut x, *n, dst.as_ref());
                for (v, s) in x.iter_mut().zip(inv_eig) {
                    *v *= s;
                }
                dst3(&mut x, *n, dst.as_ref());
                x
            }
            Kind::Radial { lower, diag, upper } => thomas(lower, diag, upper, rhs),
        }
    }
}

/// In-place three-dimensional DST-I on an `n^3` array.
fn dst3(x: &mut [f64], n: usize, dst: &dyn Dst1<f64>) {
    let mut scratch = vec![0.0; dst.get_scratch_len()];
    // some rustdct algorithms expect a zeroed scratch buffer on every call
    let run = |line: &mut [f64], scratch: &mut [f64]| {
        scratch.fill(0.0);
        dst.process_dst1_with_scratch(line, scratch);
    };
    for line in x.chunks_exact_mut(n) {
        run(line, &mut scratch);
    }
    let mut buf = vec![0.0; n * n];
    // second axis: transpose each (j, k) slab
    for i in 0..n {
        let slab = &mut x[i * n * n..(i + 1) * n * n];
        for j in 0..n {
            for k in 0..n {
                buf[k * n + j] = slab[j * n + k];
            }
        }
        for line in buf.chunks_exact_mut(n) {
            run(line, &mut scratch);
        }
        for j in 0..n {
            for k in 0..n {
                slab[j * n + k] = buf[k * n + j];
            }
        }
    }
    // first axis: gather (i) lines for a fixed j
    for j in 0..n {
        for i in 0..n {
            let row = (i * n + j) * n;
            for k in 0..n {
                buf[k * n + i] = x[row + k];
            }
        }
        for line in buf.chunks_exact_mut(n) {
            run(line, &mut scratch);
        }
        for i in 0..n {
            let row = (i * n + j) * n;
            for k in 0..n {
                x[row + k] = buf[k * n + i];
            }
        }
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}
