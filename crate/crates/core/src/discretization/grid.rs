use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform radial grid `r_j = j h`, `j = 0..n`, with `h = r_max / (n - 1)`.
///
/// Nodes carry finite-volume shells: node 0 owns the ball of radius `h/2`,
/// node `j` the shell `[r_j - h/2, r_j + h/2]`. A zero ghost value sits at
/// `r_max + h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
    h: f64,
}

impl RadialGrid {
    pub const MIN_NODES: usize = 16;

    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::config(format!("radial grid needs r_max > 0, got {r_max}")));
        }
        if n < Self::MIN_NODES {
            return Err(Error::config(format!(
                "radial grid needs at least {} nodes, got {n}",
                Self::MIN_NODES
            )));
        }
        Ok(Self {
            r_max,
            n,
            h: r_max / (n - 1) as f64,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// Radius of the edge midpoint between nodes `j - 1` and `j`.
    #[inline]
    pub(crate) fn r_mid(&self, j: usize) -> f64 {
        (j as f64 - 0.5) * self.h
    }

    /// Shell volume owned by node `j`.
    #[inline]
    pub fn volume(&self, j: usize) -> f64 {
        let h = self.h;
        if j == 0 {
            4.0 * PI / 3.0 * (0.5 * h).powi(3)
        } else {
            let r = self.r(j);
            4.0 * PI * (r * r * h + h * h * h / 12.0)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.r(j))
    }
}

/// Where the nodes of a box grid sit relative to the cube faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    /// Nodes at both faces: `h = 2 half_width / (n - 1)`.
    Node,
    /// Nodes at cell centres: `h = 2 half_width / n`.
    Cell,
}

/// Uniform grid on the cube `center + [-half_width, half_width]^3`.
///
/// Values outside the node array are zero (Dirichlet ghosts). Storage is
/// row-major with the first axis slowest: `idx = (i n + j) n + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    half_width: f64,
    n: usize,
    h: f64,
    center: [f64; 3],
    centering: Centering,
}

impl BoxGrid {
    pub fn new(half_width: f64, n_per_axis: usize) -> Result<Self> {
        Self::with_center(half_width, n_per_axis, [0.0; 3], Centering::Node)
    }

    pub fn with_center(
        half_width: f64,
        n_per_axis: usize,
        center: [f64; 3],
        centering: Centering,
    ) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::config(format!(
                "box grid needs half_width > 0, got {half_width}"
            )));
        }
        if n_per_axis < 3 {
            return Err(Error::config(format!(
                "box grid needs at least 3 nodes per axis, got {n_per_axis}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("box centre must be finite"));
        }
        let h = match centering {
            Centering::Node => 2.0 * half_width / (n_per_axis - 1) as f64,
            Centering::Cell => 2.0 * half_width / n_per_axis as f64,
        };
        Ok(Self {
            half_width,
            n: n_per_axis,
            h,
            center,
            centering,
        })
    }

    /// Same lattice shifted so that its centre sits at `center`.
    pub fn recentered(&self, center: [f64; 3]) -> Self {
        Self {
            center,
            ..self.clone()
        }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn centering(&self) -> Centering {
        self.centering
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Offset of node `i` from the centre along one axis.
    #[inline]
    pub fn offset(&self, i: usize) -> f64 {
        match self.centering {
            Centering::Node => -self.half_width + i as f64 * self.h,
            Centering::Cell => -self.half_width + (i as f64 + 0.5) * self.h,
        }
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        [
            self.center[0] + self.offset(i),
            self.center[1] + self.offset(j),
            self.center[2] + self.offset(k),
        ]
    }

    /// Smallest distance from `p` to a face of the cube.
    pub fn distance_to_boundary(&self, p: [f64; 3]) -> f64 {
        (0..3)
            .map(|a| self.half_width - (p[a] - self.center[a]).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// True when the node lattice is symmetric about the centre and has a
    /// node there.
    pub fn has_center_node(&self) -> bool {
        self.centering == Centering::Node && self.n % 2 == 1
    }
}

/// A discretized region of R^3 on which fields live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Grid {
    Radial(RadialGrid),
    Box(BoxGrid),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Radial(g) => g.n(),
            Grid::Box(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self) -> f64 {
        match self {
            Grid::Radial(g) => g.h(),
            Grid::Box(g) => g.h(),
        }
    }

    /// Quadrature weight of node `idx`.
    #[inline]
    pub fn mass(&self, idx: usize) -> f64 {
        match self {
            Grid::Radial(g) => g.volume(idx),
            Grid::Box(g) => g.h().powi(3),
        }
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mass(i)).collect()
    }

    /// Physical position of node `idx`; radial nodes are placed on the
    /// positive first axis.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        match self {
            Grid::Radial(g) => [g.r(idx), 0.0, 0.0],
            Grid::Box(g) => g.position(idx),
        }
    }

    pub fn as_box(&self) -> Option<&BoxGrid> {
        match self {
            Grid::Box(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_radial(&self) -> Option<&RadialGrid> {
        match self {
            Grid::Radial(g) => Some(g),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Grid::Radial(_) => "radial",
            Grid::Box(_) => "box",
        }
    }
}

impl From<RadialGrid> for Grid {
    fn from(g: RadialGrid) -> Self {
        Grid::Radial(g)
    }
}

impl From<BoxGrid> for Grid {
    fn from(g: BoxGrid) -> Self {
        Grid::Box(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_volumes_tile_the_ball() {
        let g = RadialGrid::new(4.0, 33).unwrap();
        let total: f64 = (0..g.n()).map(|j| g.volume(j)).sum();
        let outer = g.r_max() + 0.5 * g.h();
        let exact = 4.0 * PI / 3.0 * outer.powi(3);
        assert!((total - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(RadialGrid::new(1.0, 8).is_err());
        assert!(RadialGrid::new(-1.0, 64).is_err());
        assert!(BoxGrid::new(1.0, 2).is_err());
    }

    #[test]
    fn node_centred_box_spans_the_cube() {
        let g = BoxGrid::new(2.0, 5).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.position(0), [-2.0, -2.0, -2.0]);
        assert_eq!(g.position(g.len() - 1), [2.0, 2.0, 2.0]);
        assert!(g.has_center_node());
        let c = g.recentered([1.0, 0.0, -1.0]);
        assert_eq!(c.position(c.index(2, 2, 2)), [1.0, 0.0, -1.0]);
    }

    #[test]
    fn cell_centred_spacing() {
        let g = BoxGrid::with_center(1.0, 4, [0.0; 3], Centering::Cell).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.offset(0), -0.75);
    }
}
