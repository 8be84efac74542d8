use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::discretization::{BoxGrid, Grid};
use crate::error::{Error, Result};
use crate::reduction::h1;

use super::config::ExperimentConfig;
use super::critical::{newton, Probe};
use super::scan::{make_reducer, shoot_profile};

pub const CONCENTRATION_COLUMNS: &[&str] = &["eps", "z1", "z2", "z3", "distance", "w_norm", "grad_norm"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub eps: f64,
    /// Refined critical point of `J̃_ε` near `x₀/ε`.
    pub z_star: [f64; 3],
    /// `‖u_ε − U_{ε,x₀/ε}‖_{H¹}` with `u_ε = U_{ε,z*} + w_{ε,z*}`.
    pub distance: f64,
    pub w_norm: f64,
    pub grad_norm: f64,
}

/// Catmull–Rom weights for the fractional offset `t ∈ [0, 1)`.
fn cubic_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Values of `f` (on `grid`, zero outside) at every node shifted by `shift`.
/// Integer shifts in lattice units reproduce node values exactly.
pub fn shifted_values(grid: &BoxGrid, f: &[f64], shift: [f64; 3]) -> Vec<f64> {
    let n = grid.n() as i64;
    let h = grid.h();
    let split = shift.map(|s| {
        let q = s / h;
        let base = q.floor();
        (base as i64, cubic_weights(q - base))
    });
    (0..grid.len())
        .map(|idx| {
            let (i, j, k) = grid.coords(idx);
            let ijk = [i as i64, j as i64, k as i64];
            let mut acc = 0.0;
            for (a, wa) in split[0].1.iter().enumerate() {
                let ia = ijk[0] + split[0].0 + a as i64 - 1;
                if *wa == 0.0 || ia < 0 || ia >= n {
                    continue;
                }
                for (b, wb) in split[1].1.iter().enumerate() {
                    let jb = ijk[1] + split[1].0 + b as i64 - 1;
                    if *wb == 0.0 || jb < 0 || jb >= n {
                        continue;
                    }
                    for (c, wc) in split[2].1.iter().enumerate() {
                        let kc = ijk[2] + split[2].0 + c as i64 - 1;
                        if *wc == 0.0 || kc < 0 || kc >= n {
                            continue;
                        }
                        acc += wa * wb * wc * f[grid.index(ia as usize, jb as usize, kc as usize)];
                    }
                }
            }
            acc
        })
        .collect()
}

/// Critical point of `V` used as `x₀`: the configured one, or Newton on
/// `∇V` from the centre of the scan region.
pub fn limit_point(cfg: &ExperimentConfig) -> Result<[f64; 3]> {
    if let Some(x0) = cfg.x0 {
        return Ok(x0);
    }
    let r = &cfg.region;
    let mid = [0, 1, 2].map(|a| 0.5 * (r.lo[a] + r.hi[a].max(r.lo[a])));
    cfg.params
        .potential
        .critical_point(mid, 1e-12)
        .ok_or_else(|| Error::config("no critical point of V found from the scan centre; set x0"))
}

/// For each `ε`, the solution built at the critical point of `J̃_ε` near
/// `x₀/ε` and its distance to the ansatz centred at `x₀/ε`.
pub fn concentration_study(cfg: &ExperimentConfig) -> Result<Vec<ConcentrationRow>> {
    let prof = shoot_profile(cfg)?;
    let reducer = make_reducer(cfg, &prof, cfg.reduction_settings())?;
    let x0 = limit_point(cfg)?;
    let axes: Vec<usize> = (0..3).filter(|&a| cfg.reduction.gradient_axes[a]).collect();
    let mut rows = Vec::new();
    for &eps in &cfg.eps_list {
        let z0 = x0.map(|c| c / eps);
        let mut probe = Probe::new(&reducer, eps);
        let max_step = [1.0; 3].map(|s: f64| s.max(cfg.hessian_step));
        let reach = 0.5 * reducer.settings().half_width;
        let inside = |z: [f64; 3]| (0..3).all(|a| (z[a] - z0[a]).abs() <= reach);
        let out = newton(&mut probe, z0, &axes, cfg, max_step, &inside)
            .map_err(|msg| Error::Refinement(format!("eps = {eps}: {msg}")))?;
        let pt = out.point;
        let z_star = pt.sample.z;
        let grid = reducer.grid_at(z_star)?;
        let Grid::Box(bg) = &*grid else { unreachable!() };
        let lambda = |x: [f64; 3]| cfg.params.potential.value(x).sqrt();
        let here = reducer.ground_state(lambda(z_star.map(|c| eps * c)))?;
        let g0 = reducer.ground_state(lambda(x0))?;
        let shift = [0, 1, 2].map(|a| z_star[a] - z0[a]);
        let u0 = shifted_values(bg, &g0.values, shift);
        let diff: Vec<f64> = here
            .values
            .iter()
            .zip(pt.result.w.values())
            .zip(&u0)
            .map(|((u, w), v)| u + w - v)
            .collect();
        rows.push(ConcentrationRow {
            eps,
            z_star,
            distance: h1(&grid, &diff, &diff).sqrt(),
            w_norm: pt.sample.w_norm,
            grad_norm: pt.sample.grad_j_tilde.iter().map(|g| g * g).sum::<f64>().sqrt(),
        });
    }
    Ok(rows)
}

pub fn concentration_to_csv(rows: &[ConcentrationRow]) -> String {
    let mut out = CONCENTRATION_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let vals = [r.eps, r.z_star[0], r.z_star[1], r.z_star[2], r.distance, r.w_norm, r.grad_norm];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.12e}")).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn concentration_from_csv(text: &str) -> Result<Vec<ConcentrationRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CONCENTRATION_COLUMNS {
        return Err(Error::Format(format!("unexpected concentration header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number `{s}`"))))
            .collect::<Result<_>>()?;
        if v.len() != CONCENTRATION_COLUMNS.len() {
            return Err(Error::Format("short concentration row".into()));
        }
        rows.push(ConcentrationRow {
            eps: v[0],
            z_star: [v[1], v[2], v[3]],
            distance: v[4],
            w_norm: v[5],
            grad_norm: v[6],
        });
    }
    Ok(rows)
}

pub fn write_concentration(path: &Path, rows: &[ConcentrationRow]) -> Result<()> {
    std::fs::write(path, concentration_to_csv(rows)).map_err(|e| Error::io(path, e))
}
