//! External potentials `V` with analytic first and second derivatives.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial cubic spline `V(x) = f(|x − center|)` with `f'` clamped to zero
/// at both ends and constant continuation past the last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub center: [f64; 3],
    r: Vec<f64>,
    v: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
    source: String,
}

impl RadialTable {
    pub fn new(center: [f64; 3], r: Vec<f64>, v: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if r.len() < 3 || r.len() != v.len() {
            return Err(Error::config("potential table needs at least 3 (r, V) rows"));
        }
        if r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("potential table radii must start at 0 and increase"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("potential table values must be finite"));
        }
        let m = clamped_spline(&r, &v);
        Ok(Self {
            center,
            r,
            v,
            m,
            source: source.into(),
        })
    }

    /// Reads whitespace- or comma-separated `r V` rows; `#` starts a comment.
    pub fn from_file(path: &Path, center: [f64; 3]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("bad number in potential table {}", path.display()),
                })?;
            if nums.len() != 2 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "potential table rows need two columns".into(),
                });
            }
            r.push(nums[0]);
            v.push(nums[1]);
        }
        Self::new(center, r, v, path.display().to_string())
    }

    /// `(f, f', f'')` at radius `s`.
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let n = self.r.len();
        if s >= self.r[n - 1] {
            return (self.v[n - 1], 0.0, 0.0);
        }
        let j = match self.r.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(j) => j.min(n - 2),
            Err(j) => j - 1,
        };
        let h = self.r[j + 1] - self.r[j];
        let a = (self.r[j + 1] - s) / h;
        let b = (s - self.r[j]) / h;
        let (m0, m1) = (self.m[j], self.m[j + 1]);
        let f = a * self.v[j] + b * self.v[j + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let df = (self.v[j + 1] - self.v[j]) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2f = a * m0 + b * m1;
        (f, df, d2f)
    }
}

/// Cubic spline second derivatives with zero end slopes.
fn clamped_spline(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let h0 = x[1] - x[0];
    diag[0] = h0 / 3.0;
    sup[0] = h0 / 6.0;
    rhs[0] = (y[1] - y[0]) / h0;
    for i in 1..n - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        sub[i] = hl / 6.0;
        diag[i] = (hl + hr) / 3.0;
        sup[i] = hr / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
    }
    let hn = x[n - 1] - x[n - 2];
    sub[n - 1] = hn / 6.0;
    diag[n - 1] = hn / 3.0;
    rhs[n - 1] = -(y[n - 1] - y[n - 2]) / hn;
    // Thomas sweep
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
    }
    m
}

/// Symbolic description of the potential `V` in physical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    Constant { c: f64 },
    /// `a + b exp(−|x − center|²/σ²)`
    Bump { a: f64, b: f64, center: [f64; 3], sigma: f64 },
    /// `a + b exp(−((ρ − ρ₀)² + x₃²)/σ²)` with `ρ = (x₁² + x₂²)^{1/2}`
    Ring { a: f64, b: f64, rho0: f64, sigma: f64 },
    Table(RadialTable),
    Sum(Vec<PotentialSpec>),
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl PotentialSpec {
    pub fn constant(c: f64) -> Self {
        PotentialSpec::Constant { c }
    }

    pub fn bump(a: f64, b: f64, center: [f64; 3], sigma: f64) -> Self {
        PotentialSpec::Bump { a, b, center, sigma }
    }

    pub fn ring(a: f64, b: f64, rho0: f64, sigma: f64) -> Self {
        PotentialSpec::Ring { a, b, rho0, sigma }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            PotentialSpec::Constant { .. } => true,
            PotentialSpec::Bump { b, .. } | PotentialSpec::Ring { b, .. } => *b == 0.0,
            PotentialSpec::Table(t) => t.v.iter().all(|&v| v == t.v[0]),
            PotentialSpec::Sum(parts) => parts.iter().all(|p| p.is_constant()),
        }
    }

    /// Value, gradient and Hessian at `x`.
    pub fn eval(&self, x: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        match self {
            PotentialSpec::Constant { c } => (*c, [0.0; 3], [[0.0; 3]; 3]),
            PotentialSpec::Bump { a, b, center, sigma } => {
                let d = sub3(x, *center);
                let s2 = sigma * sigma;
                let e = b * (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / s2).exp();
                let g = d.map(|di| -2.0 * e * di / s2);
                let mut hess = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        hess[i][j] = e * (4.0 * d[i] * d[j] / (s2 * s2) - if i == j { 2.0 / s2 } else { 0.0 });
                    }
                }
                (a + e, g, hess)
            }
            PotentialSpec::Ring { a, b, rho0, sigma } => {
                let s2 = sigma * sigma;
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let q = ((rho - rho0) * (rho - rho0) + x[2] * x[2]) / s2;
                let e = b * (-q).exp();
                // ∂q and ∂²q; on the axis the cone term has no derivative and
                // its symmetric limit is used
                let (dq, d2q) = if rho > 1e-300 {
                    let c = 2.0 * (rho - rho0) / s2;
                    let dq = [c * x[0] / rho, c * x[1] / rho, 2.0 * x[2] / s2];
                    let mut d2q = [[0.0; 3]; 3];
                    for i in 0..2 {
                        for j in 0..2 {
                            let xx = x[i] * x[j] / (rho * rho);
                            let delta = if i == j { 1.0 } else { 0.0 };
                            d2q[i][j] = 2.0 / s2 * (xx + (rho - rho0) * (delta - xx) / rho);
                        }
                    }
                    d2q[2][2] = 2.0 / s2;
                    (dq, d2q)
                } else {
                    let mut d2q = [[0.0; 3]; 3];
                    d2q[0][0] = 2.0 / s2;
                    d2q[1][1] = 2.0 / s2;
                    d2q[2][2] = 2.0 / s2;
                    ([0.0, 0.0, 2.0 * x[2] / s2], d2q)
                };
                let g = dq.map(|d| -e * d);
                let mut hess = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        hess[i][j] = e * (dq[i] * dq[j] - d2q[i][j]);
                    }
                }
                (a + e, g, hess)
            }
            PotentialSpec::Table(t) => {
                let d = sub3(x, t.center);
                let s = norm3(d);
                let (f, df, d2f) = t.eval(s);
                if s < 1e-12 {
                    let h = [[d2f, 0.0, 0.0], [0.0, d2f, 0.0], [0.0, 0.0, d2f]];
                    return (f, [0.0; 3], h);
                }
                let n = d.map(|v| v / s);
                let g = n.map(|v| df * v);
                let mut hess = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        hess[i][j] = d2f * n[i] * n[j] + df / s * (delta - n[i] * n[j]);
                    }
                }
                (f, g, hess)
            }
            PotentialSpec::Sum(parts) => {
                let mut v = 0.0;
                let mut g = [0.0; 3];
                let mut h = [[0.0; 3]; 3];
                for part in parts {
                    let (pv, pg, ph) = part.eval(x);
                    v += pv;
                    for i in 0..3 {
                        g[i] += pg[i];
                        for j in 0..3 {
                            h[i][j] += ph[i][j];
                        }
                    }
                }
                (v, g, h)
            }
        }
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        match self {
            PotentialSpec::Constant { c } => *c,
            PotentialSpec::Bump { a, b, center, sigma } => {
                let d = sub3(x, *center);
                a + b * (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (sigma * sigma)).exp()
            }
            PotentialSpec::Sum(parts) => parts.iter().map(|p| p.value(x)).sum(),
            _ => self.eval(x).0,
        }
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        self.eval(x).1
    }

    pub fn hessian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        self.eval(x).2
    }

    /// Smallest value over an `n³` sample of the box `[lo, hi]`.
    pub fn min_on_box(&self, lo: [f64; 3], hi: [f64; 3], n: usize) -> f64 {
        let n = n.max(2);
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let t = |a: usize, d: usize| {
                        if hi[d] == lo[d] {
                            lo[d]
                        } else {
                            lo[d] + (hi[d] - lo[d]) * a as f64 / (n - 1) as f64
                        }
                    };
                    min = min.min(self.value([t(i, 0), t(j, 1), t(k, 2)]));
                }
            }
        }
        min
    }

    /// Solves `∇V(x) = 0` by Newton's method from `start`.
    pub fn critical_point(&self, start: [f64; 3], tol: f64) -> Option<[f64; 3]> {
        let mut x = start;
        for _ in 0..100 {
            let (_, g, h) = self.eval(x);
            if norm3(g) <= tol {
                return Some(x);
            }
            let f = crate::linalg::Ldlt::new(&h)?;
            let dx = f.solve(&g);
            for i in 0..3 {
                x[i] -= dx[i];
            }
            if x.iter().any(|v| !v.is_finite()) {
                return None;
            }
        }
        None
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Constant { c } => write!(f, "constant({c})"),
            PotentialSpec::Bump { a, b, center, sigma } => write!(
                f,
                "bump({a},{b},{},{},{},{sigma})",
                center[0], center[1], center[2]
            ),
            PotentialSpec::Ring { a, b, rho0, sigma } => write!(f, "ring({a},{b},{rho0},{sigma})"),
            PotentialSpec::Table(t) => write!(f, "table({})", t.source),
            PotentialSpec::Sum(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_term(term: &str) -> Result<PotentialSpec> {
    let term = term.trim();
    let open = term
        .find('(')
        .ok_or_else(|| Error::config(format!("potential `{term}` needs an argument list")))?;
    if !term.ends_with(')') {
        return Err(Error::config(format!("potential `{term}` is missing `)`")));
    }
    let name = term[..open].trim();
    let inner = &term[open + 1..term.len() - 1];
    if name == "table" {
        let path = inner.trim().trim_matches('"');
        return Ok(PotentialSpec::Table(RadialTable::from_file(Path::new(path), [0.0; 3])?));
    }
    let args: Vec<f64> = inner
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::config(format!("bad numeric argument in `{term}`")))?;
    if args.iter().any(|a| !a.is_finite()) {
        return Err(Error::config(format!("non-finite argument in `{term}`")));
    }
    let want = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::config(format!("`{name}` takes {n} arguments, got {}", args.len())))
        }
    };
    match name {
        "constant" => {
            want(1)?;
            Ok(PotentialSpec::constant(args[0]))
        }
        "bump" => {
            // bump(a, b, sigma) centred at the origin, or bump(a, b, x1, x2, x3, sigma)
            let (center, sigma) = match args.len() {
                3 => ([0.0; 3], args[2]),
                6 => ([args[2], args[3], args[4]], args[5]),
                n => {
                    return Err(Error::config(format!("`bump` takes 3 or 6 arguments, got {n}")));
                }
            };
            if !(sigma > 0.0) {
                return Err(Error::config("bump width must be positive"));
            }
            Ok(PotentialSpec::bump(args[0], args[1], center, sigma))
        }
        "ring" => {
            want(4)?;
            if !(args[3] > 0.0) || args[2] < 0.0 {
                return Err(Error::config("ring needs rho0 >= 0 and sigma > 0"));
            }
            Ok(PotentialSpec::ring(args[0], args[1], args[2], args[3]))
        }
        other => Err(Error::config(format!("unknown potential kind `{other}`"))),
    }
}

impl FromStr for PotentialSpec {
    type Err = Error;

    /// `constant(c)`, `bump(a,b,σ)`, `bump(a,b,x1,x2,x3,σ)`, `ring(a,b,ρ0,σ)`,
    /// `table(path)`, or a `+`-separated sum of these.
    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut depth = 0usize;
        let mut start = 0;
        for (i, c) in s.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                '+' if depth == 0 => {
                    terms.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        terms.push(&s[start..]);
        let mut parts = terms.into_iter().map(parse_term).collect::<Result<Vec<_>>>()?;
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            PotentialSpec::Sum(parts)
        })
    }
}
