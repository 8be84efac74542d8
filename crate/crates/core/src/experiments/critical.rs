use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Ldlt};
use crate::profile::RadialProfile;
use crate::reduction::{natural_constraint_report, NaturalConstraintReport, ReducedPoint, Reducer};

use super::config::{DetectAt, ExperimentConfig};
use super::scan::{make_reducer, shoot_profile, ScanRow, ScanTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classification {
    Max,
    Min,
    Saddle { index: usize },
    /// Some Hessian eigenvalues are below the zero threshold.
    Degenerate { zero_directions: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub eps: f64,
    pub z: [f64; 3],
    pub x: [f64; 3],
    pub j_tilde: f64,
    pub grad_norm: f64,
    pub hessian: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    pub classification: Classification,
    pub newton_iterations: usize,
    pub constraint: NaturalConstraintReport,
    /// `5·tol_aux + 10ε²`
    pub constraint_bound: f64,
}

impl CriticalPoint {
    pub fn satisfies_constraint(&self) -> bool {
        self.constraint.full_residual <= self.constraint_bound
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointReport {
    pub eps: f64,
    pub points: Vec<CriticalPoint>,
    /// `J̃` is flat over the whole scan, so no point is isolated.
    pub plateau: bool,
    pub expected: usize,
    pub log: Vec<String>,
}

impl CriticalPointReport {
    /// Count reaches `cup_length_plus_one` and every point passes the
    /// natural-constraint check.
    pub fn passed(&self) -> bool {
        self.points.len() >= self.expected && self.points.iter().all(|p| p.satisfies_constraint())
    }
}

fn add(z: [f64; 3], d: [f64; 3], s: f64) -> [f64; 3] {
    [0, 1, 2].map(|a| z[a] + s * d[a])
}

fn unit(a: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[a] = 1.0;
    e
}

fn norm_on(g: &[f64; 3], axes: &[usize]) -> f64 {
    axes.iter().map(|&a| g[a] * g[a]).sum::<f64>().sqrt()
}

/// Reduced-functional evaluations with warm-started auxiliary solves.
pub(crate) struct Probe<'a> {
    pub reducer: &'a Reducer,
    pub eps: f64,
    warm: Option<Vec<f64>>,
}

impl<'a> Probe<'a> {
    pub fn new(reducer: &'a Reducer, eps: f64) -> Self {
        Self {
            reducer,
            eps,
            warm: None,
        }
    }

    pub fn eval(&mut self, z: [f64; 3]) -> Result<ReducedPoint> {
        let site = self.reducer.site(self.eps, z)?;
        let res = self.reducer.solve_auxiliary(&site, self.warm.as_deref())?;
        let pt = self.reducer.reduced_from(&site, res)?;
        self.warm = Some(pt.result.w.values().to_vec());
        Ok(pt)
    }

    /// Central differences of `∇J̃` along `axes`, symmetrized. Other rows
    /// and columns are zero.
    pub fn hessian(&mut self, z: [f64; 3], axes: &[usize], step: f64) -> Result<[[f64; 3]; 3]> {
        let mut h = [[0.0; 3]; 3];
        for &b in axes {
            let gp = self.eval(add(z, unit(b), step))?.sample.grad_j_tilde;
            let gm = self.eval(add(z, unit(b), -step))?.sample.grad_j_tilde;
            for &a in axes {
                h[a][b] = (gp[a] - gm[a]) / (2.0 * step);
            }
        }
        for a in 0..3 {
            for b in 0..a {
                let m = 0.5 * (h[a][b] + h[b][a]);
                h[a][b] = m;
                h[b][a] = m;
            }
        }
        Ok(h)
    }
}

pub(crate) struct NewtonOutcome {
    pub point: ReducedPoint,
    pub iterations: usize,
}

/// Damped Newton on `∇J̃` restricted to `axes`. Steps are capped at
/// `max_step` per axis and halved until `|∇J̃|` decreases.
pub(crate) fn newton(
    probe: &mut Probe,
    start: [f64; 3],
    axes: &[usize],
    cfg: &ExperimentConfig,
    max_step: [f64; 3],
    inside: &dyn Fn([f64; 3]) -> bool,
) -> std::result::Result<NewtonOutcome, String> {
    let fail = |e: Error| e.to_string();
    let mut z = start;
    let mut pt = probe.eval(z).map_err(fail)?;
    for it in 0..=cfg.newton_max_iter {
        let g = pt.sample.grad_j_tilde;
        let gn = norm_on(&g, axes);
        if gn <= cfg.tol_crit {
            return Ok(NewtonOutcome { point: pt, iterations: it });
        }
        if it == cfg.newton_max_iter {
            break;
        }
        let mut h = probe.hessian(z, axes, cfg.hessian_step).map_err(fail)?;
        for a in 0..3 {
            if !axes.contains(&a) {
                h[a][a] = 1.0;
            }
        }
        let lu = Ldlt::new(&h).ok_or("singular Hessian of the reduced functional")?;
        let mut rhs = [0.0; 3];
        for &a in axes {
            rhs[a] = -g[a];
        }
        let mut s = lu.solve(&rhs);
        let over = axes
            .iter()
            .map(|&a| s[a].abs() / max_step[a])
            .fold(0.0, f64::max);
        if over > 1.0 {
            s = s.map(|c| c / over);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..6 {
            let trial = add(z, s, t);
            if inside(trial) {
                let p = probe.eval(trial).map_err(fail)?;
                if norm_on(&p.sample.grad_j_tilde, axes) < gn {
                    accepted = Some((trial, p));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((zn, p)) => {
                z = zn;
                pt = p;
            }
            None => return Err(format!("no decrease of |grad| from z = {z:?} (|grad| = {gn:.3e})")),
        }
    }
    Err(format!(
        "no convergence in {} Newton steps (|grad| = {:.3e} at z = {z:?})",
        cfg.newton_max_iter,
        norm_on(&pt.sample.grad_j_tilde, axes)
    ))
}

fn classify(eigs: &[f64; 3], zero: f64) -> Classification {
    let zeros = eigs.iter().filter(|e| e.abs() <= zero).count();
    let neg = eigs.iter().filter(|&&e| e < -zero).count();
    if zeros > 0 {
        Classification::Degenerate { zero_directions: zeros }
    } else if neg == 3 {
        Classification::Max
    } else if neg == 0 {
        Classification::Min
    } else {
        Classification::Saddle { index: neg }
    }
}

/// Seeds for one `ε`: sign changes of a gradient component between
/// neighbours, and interior nodes where `|∇J̃|` is smallest or `J̃` is
/// extremal among their neighbours.
fn seeds(rows: &[&ScanRow], cfg: &ExperimentConfig, axes: &[usize]) -> Vec<usize> {
    let region = &cfg.region;
    let scanned = region.scanned_axes();
    let ok = |i: usize| rows.get(i).and_then(|r| r.sample.as_ref());
    let gnorm = |i: usize| ok(i).map(|s| norm_on(&s.grad_j_tilde, axes)).unwrap_or(f64::INFINITY);
    let mut out = Vec::new();
    for i in 0..rows.len() {
        let Some(s) = ok(i) else { continue };
        let ijk = region.coords(i);
        let mut interior = true;
        let mut neighbours = Vec::new();
        for &a in &scanned {
            for d in [-1i64, 1] {
                let c = ijk[a] as i64 + d;
                if c < 0 || c >= region.n[a] as i64 {
                    interior = false;
                    continue;
                }
                let mut nb = ijk;
                nb[a] = c as usize;
                let j = region.index(nb);
                if let Some(t) = ok(j) {
                    neighbours.push((j, t));
                } else {
                    interior = false;
                }
                if d == 1 {
                    if let Some(t) = ok(j) {
                        let flips = axes
                            .iter()
                            .any(|&b| s.grad_j_tilde[b] * t.grad_j_tilde[b] < 0.0);
                        if flips {
                            out.push(if gnorm(i) <= gnorm(j) { i } else { j });
                        }
                    }
                }
            }
        }
        if interior && !neighbours.is_empty() {
            let g = gnorm(i);
            let smallest = neighbours.iter().all(|&(j, _)| g <= gnorm(j));
            let top = neighbours.iter().all(|(_, t)| s.j_tilde >= t.j_tilde);
            let bottom = neighbours.iter().all(|(_, t)| s.j_tilde <= t.j_tilde);
            if smallest || top || bottom {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Two points closer than two scan cells along every scanned axis.
fn same_cell(cfg: &ExperimentConfig, a: [f64; 3], b: [f64; 3]) -> bool {
    let c = cfg.region.cell();
    cfg.region
        .scanned_axes()
        .iter()
        .all(|&k| (a[k] - b[k]).abs() < 2.0 * c[k] - 1e-12)
}

fn is_plateau(rows: &[&ScanRow], cfg: &ExperimentConfig) -> bool {
    let samples: Vec<_> = rows.iter().filter_map(|r| r.sample.as_ref()).collect();
    if samples.len() < 2 {
        return false;
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.j_tilde), hi.max(s.j_tilde)));
    let scale = samples.iter().map(|s| s.j_tilde.abs()).fold(0.0, f64::max);
    let gmax = samples
        .iter()
        .map(|s| s.grad_j_tilde.iter().map(|g| g * g).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    hi - lo <= 1e-8 * scale && gmax <= cfg.tol_crit
}

/// Newton axes: scanned and differenced.
fn newton_axes(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.region
        .scanned_axes()
        .into_iter()
        .filter(|&a| cfg.reduction.gradient_axes[a])
        .collect()
}

/// Refines every seed of the scan, deduplicates, classifies and checks the
/// natural constraint.
pub fn find_critical_points(scan: &ScanTable, cfg: &ExperimentConfig) -> Result<Vec<CriticalPointReport>> {
    let prof = shoot_profile(cfg)?;
    let targets: Vec<f64> = match cfg.detect_at {
        DetectAt::Smallest => vec![cfg.smallest_eps()],
        DetectAt::All => cfg.eps_list.clone(),
    };
    let mut reports = Vec::new();
    for eps in targets {
        let rows: Vec<&ScanRow> = scan.at_eps(eps).collect();
        if rows.len() != cfg.region.len() {
            return Err(Error::usage(format!(
                "scan has {} rows at eps = {eps}, the config expects {}",
                rows.len(),
                cfg.region.len()
            )));
        }
        reports.push(critical_points_at(&rows, eps, cfg, &prof)?);
    }
    Ok(reports)
}

fn critical_points_at(
    rows: &[&ScanRow],
    eps: f64,
    cfg: &ExperimentConfig,
    prof: &Arc<RadialProfile>,
) -> Result<CriticalPointReport> {
    let mut report = CriticalPointReport {
        eps,
        points: Vec::new(),
        plateau: false,
        expected: cfg.cup_length_plus_one,
        log: Vec::new(),
    };
    if is_plateau(rows, cfg) {
        report.plateau = true;
        report.log.push(format!("eps = {eps}: J_tilde is flat over the scan region"));
        return Ok(report);
    }
    let axes = newton_axes(cfg);
    let mut seed_nodes = seeds(rows, cfg, &axes);
    // best seeds first, then drop seeds sharing a cell with a better one
    let gn = |i: usize| {
        rows[i]
            .sample
            .as_ref()
            .map(|s| norm_on(&s.grad_j_tilde, &axes))
            .unwrap_or(f64::INFINITY)
    };
    seed_nodes.sort_by(|&a, &b| gn(a).total_cmp(&gn(b)).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in seed_nodes {
        if !kept.iter().any(|&k| same_cell(cfg, rows[k].x(), rows[i].x())) {
            kept.push(i);
        }
    }

    let reducer = make_reducer(cfg, prof, cfg.reduction_settings())?;
    let full = make_reducer(
        cfg,
        prof,
        crate::reduction::ReductionSettings {
            gradient_axes: [true; 3],
            ..cfg.reduction_settings()
        },
    )?;
    let cell_z = cfg.region.cell().map(|c| (c / eps).max(cfg.hessian_step));
    let inside = |z: [f64; 3]| cfg.region.contains(z.map(|c| eps * c), 1.0);
    let mut refined: Vec<(ReducedPoint, usize)> = Vec::new();
    for i in kept {
        let z0 = rows[i].z;
        let mut probe = Probe::new(&reducer, eps);
        match newton(&mut probe, z0, &axes, cfg, cell_z, &inside) {
            Ok(out) => {
                let x = out.point.sample.z.map(|c| eps * c);
                if refined
                    .iter()
                    .any(|(p, _)| same_cell(cfg, p.sample.z.map(|c| eps * c), x))
                {
                    report.log.push(format!("seed z = {z0:?} converged onto an earlier point"));
                } else {
                    refined.push((out.point, out.iterations));
                }
            }
            Err(msg) => report.log.push(format!("seed z = {z0:?} dropped: {msg}")),
        }
    }

    for (pt, iterations) in refined {
        let z = pt.sample.z;
        let mut probe = Probe::new(&full, eps);
        let at = probe.eval(z)?;
        let hessian = probe.hessian(z, &[0, 1, 2], cfg.hessian_step)?;
        let (eigenvalues, _) = symmetric_eigen(&hessian);
        let constraint = natural_constraint_report(&at);
        report.points.push(CriticalPoint {
            eps,
            z,
            x: z.map(|c| eps * c),
            j_tilde: at.sample.j_tilde,
            grad_norm: norm_on(&pt.sample.grad_j_tilde, &axes),
            hessian,
            eigenvalues,
            classification: classify(&eigenvalues, cfg.zero_eigenvalue),
            newton_iterations: iterations,
            constraint,
            constraint_bound: 5.0 * cfg.reduction.tol_aux + 10.0 * eps * eps,
        });
    }
    Ok(report)
}
