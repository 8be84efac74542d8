//! Edge-based difference operators shared by every discrete form.
//!
//! A field `f` has one slope `(f_b - f_a) / h` per grid edge `(a, b)`. The
//! Dirichlet form is `Σ_e ω_e (Bf)_e (Bg)_e`, its matrix is `K = Bᵀ Ω B`, and
//! nodal quantities such as `|∇φ|²` are weighted averages of squared slopes
//! over the edges touching a node. Box grids have a zero ghost layer on all
//! six faces; radial grids have one at `r_max + h` and no edge at the origin.

use std::f64::consts::PI;

use super::grid::{BoxGrid, Grid, RadialGrid};

/// Condition imposed beyond the outermost radial node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarField {
    /// Zero ghost value one spacing outside the grid.
    Dirichlet,
    /// Radial grids only: the exterior is filled with the harmonic extension
    /// `φ(r_last) r_last / r`, whose Dirichlet energy `2π r_last φ²` replaces
    /// the ghost edge. Box grids fall back to `Dirichlet`.
    Monopole,
}

#[inline]
fn monopole(grid: &Grid, far: FarField) -> bool {
    far == FarField::Monopole && matches!(grid, Grid::Radial(_))
}

/// Number of edge slots used for edge-valued arrays.
pub(crate) fn edge_len(grid: &Grid) -> usize {
    match grid {
        Grid::Radial(g) => g.n() + 1,
        Grid::Box(g) => 3 * (g.n() + 1) * g.n() * g.n(),
    }
}

/// Start offset and stride (in the edge array) of the "lower" edge of each
/// node along `dir`, with the upper edge at `lower + stride`.
struct BoxEdges {
    n: usize,
    block: usize,
}

impl BoxEdges {
    fn new(g: &BoxGrid) -> Self {
        let n = g.n();
        Self {
            n,
            block: (n + 1) * n * n,
        }
    }

    #[inline]
    fn lower(&self, dir: usize, i: usize, j: usize, k: usize) -> usize {
        let n = self.n;
        match dir {
            0 => (i * n + j) * n + k,
            1 => self.block + (i * (n + 1) + j) * n + k,
            _ => 2 * self.block + (i * n + j) * (n + 1) + k,
        }
    }

    #[inline]
    fn stride(&self, dir: usize) -> usize {
        match dir {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }
}

#[inline]
fn radial_edge_weight(g: &RadialGrid, e: usize) -> f64 {
    let r = g.r_mid(e);
    4.0 * PI * r * r * g.h()
}

/// Dirichlet-to-Neumann coefficient of the harmonic exterior.
#[inline]
pub(crate) fn monopole_coefficient(g: &RadialGrid) -> f64 {
    4.0 * PI * g.r(g.n() - 1)
}

/// Edge weight `ω_e` such that the Dirichlet form is `Σ ω (Bf)(Bg)`.
#[inline]
pub(crate) fn edge_weight(grid: &Grid, e: usize) -> f64 {
    match grid {
        Grid::Radial(g) => {
            if e == 0 {
                0.0
            } else {
                radial_edge_weight(g, e)
            }
        }
        Grid::Box(g) => g.h().powi(3),
    }
}

/// Edge slopes `B f`.
pub(crate) fn slopes(grid: &Grid, f: &[f64], far: FarField) -> Vec<f64> {
    let mut e = vec![0.0; edge_len(grid)];
    match grid {
        Grid::Radial(g) => {
            let inv_h = 1.0 / g.h();
            let n = g.n();
            let last = if monopole(grid, far) { n - 1 } else { n };
            for j in 1..=last {
                let hi = if j < n { f[j] } else { 0.0 };
                e[j] = (hi - f[j - 1]) * inv_h;
            }
        }
        Grid::Box(g) => {
            let n = g.n();
            let inv_h = 1.0 / g.h();
            let be = BoxEdges::new(g);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = f[g.index(i, j, k)] * inv_h;
                        for dir in 0..3 {
                            let lo = be.lower(dir, i, j, k);
                            e[lo] += v;
                            e[lo + be.stride(dir)] -= v;
                        }
                    }
                }
            }
        }
    }
    e
}

/// Transpose of [`slopes`]: `Bᵀ e`.
pub(crate) fn slopes_transpose(grid: &Grid, e: &[f64], far: FarField) -> Vec<f64> {
    match grid {
        Grid::Radial(g) => {
            let n = g.n();
            let inv_h = 1.0 / g.h();
            let keep_ghost = !monopole(grid, far);
            (0..n)
                .map(|j| {
                    let lo = if j >= 1 { e[j] } else { 0.0 };
                    let hi = if j + 1 < n || keep_ghost { e[j + 1] } else { 0.0 };
                    (lo - hi) * inv_h
                })
                .collect()
        }
        Grid::Box(g) => {
            let n = g.n();
            let inv_h = 1.0 / g.h();
            let be = BoxEdges::new(g);
            let mut out = vec![0.0; g.len()];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = 0.0;
                        for dir in 0..3 {
                            let lo = be.lower(dir, i, j, k);
                            acc += e[lo] - e[lo + be.stride(dir)];
                        }
                        out[g.index(i, j, k)] = acc * inv_h;
                    }
                }
            }
            out
        }
    }
}

/// `Σ_e ω_e a_e b_e` over edge arrays.
pub(crate) fn edge_dot(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    match grid {
        Grid::Box(g) => g.h().powi(3) * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>(),
        Grid::Radial(_) => a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(e, (x, y))| edge_weight(grid, e) * x * y)
            .sum(),
    }
}

/// Stiffness matrix action `K f = Bᵀ Ω B f`, plus the exterior term for a
/// monopole far field.
pub(crate) fn stiffness(grid: &Grid, f: &[f64], far: FarField) -> Vec<f64> {
    match grid {
        Grid::Box(g) => box_stiffness(g, f),
        Grid::Radial(g) => {
            let n = g.n();
            let inv_h2 = 1.0 / (g.h() * g.h());
            let mono = monopole(grid, far);
            let mut out = vec![0.0; n];
            for e in 1..=n {
                if mono && e == n {
                    break;
                }
                let w = radial_edge_weight(g, e) * inv_h2;
                let hi = if e < n { f[e] } else { 0.0 };
                let d = w * (hi - f[e - 1]);
                out[e - 1] -= d;
                if e < n {
                    out[e] += d;
                }
            }
            if mono {
                out[n - 1] += monopole_coefficient(g) * f[n - 1];
            }
            out
        }
    }
}

fn box_stiffness(g: &BoxGrid, f: &[f64]) -> Vec<f64> {
    let n = g.n();
    let s0 = n * n;
    let h = g.h();
    let mut out = vec![0.0; f.len()];
    for i in 0..n {
        for j in 0..n {
            let row = (i * n + j) * n;
            for k in 0..n {
                let idx = row + k;
                let mut nb = 0.0;
                if i > 0 {
                    nb += f[idx - s0];
                }
                if i + 1 < n {
                    nb += f[idx + s0];
                }
                if j > 0 {
                    nb += f[idx - n];
                }
                if j + 1 < n {
                    nb += f[idx + n];
                }
                if k > 0 {
                    nb += f[idx - 1];
                }
                if k + 1 < n {
                    nb += f[idx + 1];
                }
                out[idx] = h * (6.0 * f[idx] - nb);
            }
        }
    }
    out
}

/// `fᵀ K g`.
#[cfg(test)]
pub(crate) fn dirichlet_form(grid: &Grid, f: &[f64], g: &[f64], far: FarField) -> f64 {
    let kf = stiffness(grid, f, far);
    kf.iter().zip(g).map(|(a, b)| a * b).sum()
}

/// Nodal average `t_n = Σ_{e∋n} c_{n,e} a_e b_e`; with `a = b = Bφ` this is
/// the discrete `|∇φ|²`.
pub(crate) fn node_average(grid: &Grid, a: &[f64], b: &[f64], far: FarField) -> Vec<f64> {
    match grid {
        Grid::Radial(g) => {
            let n = g.n();
            let keep_ghost = !monopole(grid, far);
            (0..n)
                .map(|j| {
                    if j == 0 {
                        a[1] * b[1]
                    } else {
                        let hi = if j + 1 < n || keep_ghost {
                            a[j + 1] * b[j + 1]
                        } else {
                            0.0
                        };
                        0.5 * (a[j] * b[j] + hi)
                    }
                })
                .collect()
        }
        Grid::Box(g) => {
            let n = g.n();
            let be = BoxEdges::new(g);
            let mut out = vec![0.0; g.len()];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = 0.0;
                        for dir in 0..3 {
                            let lo = be.lower(dir, i, j, k);
                            let hi = lo + be.stride(dir);
                            acc += a[lo] * b[lo] + a[hi] * b[hi];
                        }
                        out[g.index(i, j, k)] = 0.5 * acc;
                    }
                }
            }
            out
        }
    }
}

/// Adjoint-weighted spread of a nodal quantity onto edges:
/// `κ_e = Σ_{n∈e} m_n c_{n,e} q_n`.
pub(crate) fn spread_to_edges(grid: &Grid, q: &[f64], far: FarField) -> Vec<f64> {
    let mut e = vec![0.0; edge_len(grid)];
    match grid {
        Grid::Radial(g) => {
            let n = g.n();
            let keep_ghost = !monopole(grid, far);
            for j in 0..n {
                let mq = g.volume(j) * q[j];
                if j == 0 {
                    e[1] += mq;
                } else {
                    e[j] += 0.5 * mq;
                    if j + 1 < n || keep_ghost {
                        e[j + 1] += 0.5 * mq;
                    }
                }
            }
        }
        Grid::Box(g) => {
            let n = g.n();
            let m = g.h().powi(3);
            let be = BoxEdges::new(g);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mq = 0.5 * m * q[g.index(i, j, k)];
                        for dir in 0..3 {
                            let lo = be.lower(dir, i, j, k);
                            e[lo] += mq;
                            e[lo + be.stride(dir)] += mq;
                        }
                    }
                }
            }
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n).map(|_| lcg(&mut s)).collect()
    }

    fn grids() -> Vec<Grid> {
        vec![
            Grid::Box(BoxGrid::new(2.0, 7).unwrap()),
            Grid::Radial(RadialGrid::new(3.0, 20).unwrap()),
        ]
    }

    #[test]
    fn stiffness_matches_weighted_slopes() {
        for grid in grids() {
            for far in [FarField::Dirichlet, FarField::Monopole] {
                let f = random(grid.len(), 3);
                let g = random(grid.len(), 5);
                let bf = slopes(&grid, &f, far);
                let bg = slopes(&grid, &g, far);
                let mut form = edge_dot(&grid, &bf, &bg);
                if let (Grid::Radial(r), FarField::Monopole) = (&grid, far) {
                    let n = r.n();
                    form += monopole_coefficient(r) * f[n - 1] * g[n - 1];
                }
                let direct = dirichlet_form(&grid, &f, &g, far);
                assert!((form - direct).abs() < 1e-12 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        for grid in grids() {
            for far in [FarField::Dirichlet, FarField::Monopole] {
                let f = random(grid.len(), 7);
                let e = random(edge_len(&grid), 11);
                let lhs: f64 = slopes(&grid, &f, far).iter().zip(&e).map(|(a, b)| a * b).sum();
                let bt = slopes_transpose(&grid, &e, far);
                let rhs: f64 = f.iter().zip(&bt).map(|(a, b)| a * b).sum();
                assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn spread_is_adjoint_of_average() {
        for grid in grids() {
            let a = random(edge_len(&grid), 1);
            let b = random(edge_len(&grid), 2);
            let q = random(grid.len(), 3);
            let t = node_average(&grid, &a, &b, FarField::Dirichlet);
            let lhs: f64 = (0..grid.len()).map(|n| grid.mass(n) * q[n] * t[n]).sum();
            let k = spread_to_edges(&grid, &q, FarField::Dirichlet);
            let rhs: f64 = (0..k.len()).map(|e| k[e] * a[e] * b[e]).sum();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }
}
