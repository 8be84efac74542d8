//! Radial fast path through the flux law
//! `ε⁻² r² g + β ε⁻⁴ r² g³ = −∫₀^r s² u² ds`, `g = φ'`.

use std::f64::consts::PI;

use crate::discretization::{Grid, ScalarField};
use crate::error::{Error, Result};

use super::{PoissonParams, PoissonSolution};

/// The real root of `a g + b g³ = c` for `a > 0`, `b ≥ 0`, and the Newton
/// iterations used.
pub fn cubic_flux_root(a: f64, b: f64, c: f64) -> (f64, usize) {
    if c == 0.0 {
        return (0.0, 0);
    }
    if b == 0.0 {
        return (c / a, 0);
    }
    // the root lies between 0 and c/a, and also inside |g| ≤ (|c|/b)^{1/3}
    let bound = (c / a).abs().min((c.abs() / b).cbrt());
    let (mut lo, mut hi) = if c > 0.0 { (0.0, bound) } else { (-bound, 0.0) };
    let mut g = c.signum() * bound;
    for it in 1..=100 {
        let f = a * g + b * g * g * g - c;
        if f > 0.0 {
            hi = g;
        } else {
            lo = g;
        }
        let step = f / (a + 3.0 * b * g * g);
        let mut next = g - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - g).abs() <= 1e-15 * g.abs().max(f64::MIN_POSITIVE) || hi - lo <= 1e-16 * hi.abs().max(lo.abs()) {
            return (next, it);
        }
        g = next;
    }
    (g, 100)
}

/// Fourth-order cumulative integral `∫_{x_0}^{x_j} f` of node values with
/// uniform spacing `h`.
fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for j in 0..n - 1 {
        let panel = if n < 4 {
            0.5 * (f[j] + f[j + 1])
        } else if j == 0 {
            (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
        } else if j + 2 == n {
            (9.0 * f[j + 1] + 19.0 * f[j] - 5.0 * f[j - 1] + f[j - 2]) / 24.0
        } else {
            (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2]) / 24.0
        };
        out[j + 1] = out[j] + h * panel;
    }
    out
}

/// `φ_ε(u)` for a radial `u`, integrating the flux law outward and the
/// potential inward from the monopole value `ε² Q(R)/R`.
pub fn solve_phi_radial(u: &ScalarField, params: &PoissonParams) -> Result<PoissonSolution> {
    params.validate()?;
    let Grid::Radial(g) = &**u.grid() else {
        return Err(Error::usage("solve_phi_radial needs a radial grid"));
    };
    let n = g.n();
    let h = g.h();
    let r: Vec<f64> = g.nodes().collect();
    let uv = u.values();
    let q = cumulative(&(0..n).map(|j| r[j] * r[j] * uv[j] * uv[j]).collect::<Vec<_>>(), h);
    if q[n - 1] == 0.0 {
        return Ok(PoissonSolution {
            phi: ScalarField::zeros(u.grid().clone()),
            energy_value: 0.0,
            identity_residual: 0.0,
            optimality: 0.0,
            iterations: 0,
            degenerate: true,
            energy_history: vec![0.0],
        });
    }
    let a = params.eps.powi(-2);
    let b = params.beta * params.eps.powi(-4);
    let mut iterations = 0;
    let flux: Vec<f64> = (0..n)
        .map(|j| {
            if j == 0 {
                return 0.0;
            }
            let (root, it) = cubic_flux_root(a, b, -q[j] / (r[j] * r[j]));
            iterations = iterations.max(it);
            root
        })
        .collect();
    let r_max = r[n - 1];
    let phi_edge = params.eps * params.eps * q[n - 1] / r_max;
    let from_origin = cumulative(&flux, h);
    let phi: Vec<f64> = (0..n).map(|j| phi_edge - (from_origin[n - 1] - from_origin[j])).collect();

    // the identity, with the harmonic exterior contributions added
    let sphere = |f: Vec<f64>| 4.0 * PI * cumulative(&f, h)[n - 1];
    let grad_sq = sphere((0..n).map(|j| r[j] * r[j] * flux[j] * flux[j]).collect())
        + 4.0 * PI * r_max * phi_edge * phi_edge;
    let grad_4 = sphere((0..n).map(|j| r[j] * r[j] * flux[j].powi(4)).collect())
        + 4.0 * PI * phi_edge.powi(4) / (5.0 * r_max);
    let coupling = sphere((0..n).map(|j| r[j] * r[j] * phi[j] * uv[j] * uv[j]).collect());
    let lhs = a * grad_sq + b * grad_4;
    Ok(PoissonSolution {
        phi: ScalarField::new(u.grid().clone(), phi)?,
        energy_value: 0.5 * a * grad_sq + 0.25 * b * grad_4 - coupling,
        identity_residual: (lhs - coupling).abs() / coupling,
        optimality: 0.0,
        iterations,
        degenerate: false,
        energy_history: Vec::new(),
    })
}
