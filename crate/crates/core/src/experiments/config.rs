use std::collections::HashSet;
use std::path::PathBuf;

use serde::Serialize;

use crate::energy::{PotentialSpec, ProblemParams};
use crate::error::{Error, Result};
use crate::reduction::ReductionSettings;

/// Largest `ε` accepted anywhere in an experiment.
pub const EPS_CAP: f64 = 0.25;

/// Where critical points are detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetectAt {
    Smallest,
    All,
}

/// Scan lattice in physical coordinates `x = εz`. Axes with one node sit at `lo`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRegion {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub n: [usize; 3],
}

impl ScanRegion {
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node spacing per axis, 0 along single-node axes.
    pub fn cell(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| {
            if self.n[a] > 1 {
                (self.hi[a] - self.lo[a]) / (self.n[a] - 1) as f64
            } else {
                0.0
            }
        })
    }

    pub fn scanned_axes(&self) -> Vec<usize> {
        (0..3).filter(|&a| self.n[a] > 1).collect()
    }

    /// Node `idx` with the first axis running slowest.
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let ijk = self.coords(idx);
        let c = self.cell();
        [0, 1, 2].map(|a| self.lo[a] + ijk[a] as f64 * c[a])
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [_, ny, nz] = self.n;
        [idx / (ny * nz), (idx / nz) % ny, idx % nz]
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.n[1] + ijk[1]) * self.n[2] + ijk[2]
    }

    pub fn contains(&self, x: [f64; 3], margin_cells: f64) -> bool {
        let c = self.cell();
        (0..3).all(|a| {
            let m = margin_cells * c[a] + 1e-12;
            x[a] >= self.lo[a] - m && x[a] <= self.hi[a] + m
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub params: ProblemParams,
    pub eps_list: Vec<f64>,
    pub region: ScanRegion,
    pub cup_length_plus_one: usize,
    pub reduction: ReductionSettings,
    /// `|∇J̃|` accepted as critical.
    pub tol_crit: f64,
    /// Hessian eigenvalues of `J̃` below this are reported as degenerate.
    pub zero_eigenvalue: f64,
    /// Difference step in `z` for the Hessian of `J̃`.
    pub hessian_step: f64,
    pub newton_max_iter: usize,
    pub detect_at: DetectAt,
    /// Critical point of `V` used by the concentration study.
    pub x0: Option<[f64; 3]>,
    pub output: PathBuf,
}

const KEYS: &[&str] = &[
    "potential",
    "eps",
    "beta",
    "p",
    "coupling",
    "scan_lo",
    "scan_hi",
    "scan_n",
    "cup_length_plus_one",
    "tol_aux",
    "tol_orth",
    "tol_crit",
    "zero_eigenvalue",
    "max_iter",
    "box_n",
    "box_half_width",
    "hessian_step",
    "newton_max_iter",
    "gradient_axes",
    "detect",
    "x0",
    "output",
];

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn real(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| parse_err(line, format!("{key}: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("{key} must be finite")));
    }
    Ok(x)
}

fn reals(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| real(line, key, s.trim())).collect()
}

fn triple(line: usize, key: &str, v: &str) -> Result<[f64; 3]> {
    let r = reals(line, key, v)?;
    r.try_into()
        .map_err(|_| parse_err(line, format!("{key} needs three comma-separated values")))
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| parse_err(line, format!("{key}: `{v}` is not a non-negative integer")))
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(parse_err(line, format!("{key}: `{v}` is not a boolean"))),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut potential = None;
    let mut eps_list = vec![0.2, 0.1, 0.05];
    let mut beta = 1.0;
    let mut p = 2.0;
    let mut coupling = true;
    let mut lo = [-1.0, 0.0, 0.0];
    let mut hi = [1.0, 0.0, 0.0];
    let mut n = [11, 1, 1];
    let mut cup = 2;
    let mut reduction = ReductionSettings::default();
    let mut tol_crit = 1e-6;
    let mut zero_eigenvalue = 1e-6;
    let mut hessian_step = 0.5;
    let mut newton_max_iter = 12;
    let mut detect_at = DetectAt::Smallest;
    let mut x0 = None;
    let mut output = PathBuf::from("out");
    let mut seen = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(parse_err(line, format!("unknown key `{key}`")));
        }
        if !seen.insert(key.to_string()) {
            return Err(parse_err(line, format!("duplicate key `{key}`")));
        }
        if value.is_empty() {
            return Err(parse_err(line, format!("{key} has no value")));
        }
        match key {
            "potential" => {
                potential = Some(
                    value
                        .parse::<PotentialSpec>()
                        .map_err(|e| parse_err(line, e.to_string()))?,
                )
            }
            "eps" => eps_list = reals(line, key, value)?,
            "beta" => beta = real(line, key, value)?,
            "p" => p = real(line, key, value)?,
            "coupling" => coupling = flag(line, key, value)?,
            "scan_lo" => lo = triple(line, key, value)?,
            "scan_hi" => hi = triple(line, key, value)?,
            "scan_n" => {
                let v: Vec<usize> = value
                    .split(',')
                    .map(|s| count(line, key, s.trim()))
                    .collect::<Result<_>>()?;
                n = v
                    .try_into()
                    .map_err(|_| parse_err(line, "scan_n needs three comma-separated counts"))?;
            }
            "cup_length_plus_one" => cup = count(line, key, value)?,
            "tol_aux" => reduction.tol_aux = real(line, key, value)?,
            "tol_orth" => reduction.tol_orth = real(line, key, value)?,
            "tol_crit" => tol_crit = real(line, key, value)?,
            "zero_eigenvalue" => zero_eigenvalue = real(line, key, value)?,
            "max_iter" => reduction.max_iter = count(line, key, value)?,
            "box_n" => reduction.n = count(line, key, value)?,
            "box_half_width" => reduction.half_width = real(line, key, value)?,
            "hessian_step" => hessian_step = real(line, key, value)?,
            "newton_max_iter" => newton_max_iter = count(line, key, value)?,
            "gradient_axes" => {
                let v: Vec<bool> = value
                    .split(',')
                    .map(|s| flag(line, key, s.trim()))
                    .collect::<Result<_>>()?;
                reduction.gradient_axes = v
                    .try_into()
                    .map_err(|_| parse_err(line, "gradient_axes needs three flags"))?;
            }
            "detect" => {
                detect_at = match value {
                    "smallest" => DetectAt::Smallest,
                    "all" => DetectAt::All,
                    _ => return Err(parse_err(line, "detect must be `smallest` or `all`")),
                }
            }
            "x0" => x0 = Some(triple(line, key, value)?),
            "output" => output = PathBuf::from(value),
            _ => unreachable!(),
        }
    }

    let potential = potential.ok_or_else(|| Error::config("missing required key `potential`"))?;
    let mut params = ProblemParams::new(eps_list.first().copied().unwrap_or(0.1), beta, p, potential);
    params.coupling = coupling;
    let cfg = ExperimentConfig {
        params,
        eps_list,
        region: ScanRegion { lo, hi, n },
        cup_length_plus_one: cup,
        reduction,
        tol_crit,
        zero_eigenvalue,
        hessian_step,
        newton_max_iter,
        detect_at,
        x0,
        output,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::config("eps list is empty"));
        }
        for &e in &self.eps_list {
            if !(e > 0.0 && e <= EPS_CAP) {
                return Err(Error::config(format!("eps = {e} is outside (0, {EPS_CAP}]")));
            }
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("eps list must be strictly decreasing"));
        }
        if !(self.params.beta >= 0.0) {
            return Err(Error::config("beta must be non-negative"));
        }
        if !(self.params.p > 1.0 && self.params.p < 5.0) {
            return Err(Error::config("p must lie in (1, 5)"));
        }
        let r = &self.region;
        for a in 0..3 {
            if r.n[a] == 0 {
                return Err(Error::config("scan_n entries must be at least 1"));
            }
            if r.n[a] > 1 && !(r.hi[a] > r.lo[a]) {
                return Err(Error::config(format!("scan axis {} needs hi > lo", a + 1)));
            }
        }
        if !(self.tol_crit > 0.0 && self.zero_eigenvalue > 0.0 && self.hessian_step > 0.0) {
            return Err(Error::config("tol_crit, zero_eigenvalue and hessian_step must be positive"));
        }
        let mut reduction = self.reduction.clone();
        reduction.eps_max = EPS_CAP;
        reduction.validate()?;
        self.check_potential()
    }

    /// `V` is evaluated on every box around every scan node, so it must be
    /// positive on the region grown by the box half width at the largest `ε`.
    fn check_potential(&self) -> Result<()> {
        let grow = self.eps_list[0] * self.reduction.half_width;
        let lo = self.region.lo.map(|c| c - grow);
        let hi = [0, 1, 2].map(|a| self.region.hi[a].max(self.region.lo[a]) + grow);
        let v = &self.params.potential;
        let min = v.min_on_box(lo, hi, 13);
        if !(min > 0.0) || !min.is_finite() {
            return Err(Error::config(format!(
                "potential must be positive near the scan region (hypothesis V > 0), \
                 found V = {min:.3e} on [{lo:?}, {hi:?}]"
            )));
        }
        Ok(())
    }

    /// Settings for every reducer of this experiment.
    pub fn reduction_settings(&self) -> ReductionSettings {
        ReductionSettings {
            eps_max: EPS_CAP,
            ..self.reduction.clone()
        }
    }

    pub fn smallest_eps(&self) -> f64 {
        *self.eps_list.last().expect("validated")
    }
}
