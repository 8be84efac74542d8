use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::profile::{shoot_ground_state, RadialProfile};
use crate::reduction::{ReducedSample, Reducer, ReductionSettings};

use super::config::ExperimentConfig;

pub const SCAN_COLUMNS: &[&str] = &[
    "eps", "z1", "z2", "z3", "J_tilde", "leading", "expansion_error", "g1", "g2", "g3", "pg1", "pg2", "pg3",
    "w_norm", "iters", "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub eps: f64,
    /// Index of the node in the scan region.
    pub node: usize,
    pub z: [f64; 3],
    pub sample: Option<ReducedSample>,
    /// `ok`, or the solver error for this point.
    pub status: String,
}

impl ScanRow {
    pub fn is_ok(&self) -> bool {
        self.sample.is_some()
    }

    pub fn x(&self) -> [f64; 3] {
        self.z.map(|c| self.eps * c)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.12e}");
}

impl ScanTable {
    pub fn at_eps(&self, eps: f64) -> impl Iterator<Item = &ScanRow> {
        self.rows.iter().filter(move |r| r.eps == eps)
    }

    pub fn eps_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.eps) {
                out.push(r.eps);
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = SCAN_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            num(&mut out, r.eps);
            for c in r.z {
                out.push(',');
                num(&mut out, c);
            }
            let vals: Vec<f64> = match &r.sample {
                Some(s) => {
                    let mut v = vec![s.j_tilde, s.leading, s.expansion_error];
                    v.extend(s.grad_j_tilde);
                    v.extend(s.predicted_grad);
                    v.push(s.w_norm);
                    v
                }
                None => vec![f64::NAN; 10],
            };
            for v in vals {
                out.push(',');
                if v.is_nan() {
                    out.push_str("nan");
                } else {
                    num(&mut out, v);
                }
            }
            let iters = r.sample.as_ref().map(|s| s.iterations).unwrap_or(0);
            let _ = write!(out, ",{iters},{}", r.status.replace([',', '\n', '\r'], ";"));
            out.push('\n');
        }
        out
    }

    /// Reads a table written by [`ScanTable::to_csv`]. Node indices are
    /// renumbered in row order within each `ε`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != SCAN_COLUMNS {
            return Err(Error::Format(format!("unexpected scan header {header:?}")));
        }
        let mut rows: Vec<ScanRow> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let f = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number `{}` in column {}", &rec[i], SCAN_COLUMNS[i])))
            };
            let eps = f(0)?;
            let z = [f(1)?, f(2)?, f(3)?];
            let status = rec[15].to_string();
            let sample = if status == "ok" {
                Some(ReducedSample {
                    eps,
                    z,
                    j_tilde: f(4)?,
                    leading: f(5)?,
                    leading_continuum: f64::NAN,
                    expansion_error: f(6)?,
                    grad_j_tilde: [f(7)?, f(8)?, f(9)?],
                    predicted_grad: [f(10)?, f(11)?, f(12)?],
                    w_norm: f(13)?,
                    iterations: rec[14]
                        .parse()
                        .map_err(|_| Error::Format(format!("bad iteration count `{}`", &rec[14])))?,
                })
            } else {
                None
            };
            let node = rows.iter().filter(|r| r.eps == eps).count();
            rows.push(ScanRow {
                eps,
                node,
                z,
                sample,
                status,
            });
        }
        Ok(Self { rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Worker count from `QSLSP_THREADS`, default 1.
pub fn thread_count() -> Result<usize> {
    match std::env::var("QSLSP_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::config(format!("QSLSP_THREADS must be a positive integer, got `{s}`"))),
        },
        Err(_) => Ok(1),
    }
}

pub fn shoot_profile(cfg: &ExperimentConfig) -> Result<Arc<RadialProfile>> {
    Ok(Arc::new(shoot_ground_state(cfg.params.p, 1e-12)?))
}

pub fn make_reducer(
    cfg: &ExperimentConfig,
    prof: &Arc<RadialProfile>,
    settings: ReductionSettings,
) -> Result<Reducer> {
    Reducer::new(prof.clone(), cfg.params.clone(), settings)
}

/// `J̃_ε` on every scan node for every `ε`.
///
/// Each point gets a fresh reducer, so a row depends only on its own
/// `(ε, z)` and the table is byte-identical for any worker count.
pub fn scan_reduced(cfg: &ExperimentConfig) -> Result<ScanTable> {
    scan_reduced_with(cfg, thread_count()?)
}

/// [`scan_reduced`] with an explicit worker count.
pub fn scan_reduced_with(cfg: &ExperimentConfig, threads: usize) -> Result<ScanTable> {
    let prof = shoot_profile(cfg)?;
    let jobs: Vec<(f64, usize)> = cfg
        .eps_list
        .iter()
        .flat_map(|&e| (0..cfg.region.len()).map(move |i| (e, i)))
        .collect();
    let threads = threads.clamp(1, jobs.len().max(1));
    let slots: Mutex<Vec<Option<ScanRow>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let settings = cfg.reduction_settings();
    let setup: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs.len() {
                    break;
                }
                let (eps, node) = jobs[k];
                let x = cfg.region.node(node);
                let z = x.map(|c| c / eps);
                let row = match make_reducer(cfg, &prof, settings.clone()) {
                    Ok(r) => match r.reduced_value(eps, z) {
                        Ok(pt) => ScanRow {
                            eps,
                            node,
                            z,
                            sample: Some(pt.sample),
                            status: "ok".into(),
                        },
                        Err(e) => ScanRow {
                            eps,
                            node,
                            z,
                            sample: None,
                            status: e.to_string(),
                        },
                    },
                    Err(e) => {
                        *setup.lock().expect("lock") = Some(e);
                        break;
                    }
                };
                slots.lock().expect("lock")[k] = Some(row);
            });
        }
    });
    if let Some(e) = setup.into_inner().expect("lock") {
        return Err(e);
    }
    let rows = slots.into_inner().expect("lock").into_iter().map(|r| r.expect("every job ran")).collect();
    Ok(ScanTable { rows })
}
