//! Ground state of `−ΔU + U = U^p` by shooting on `U(0)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Table spacing in `r`.
const TABLE_STEP: f64 = 0.0025;
/// Start radius of the integration, reached from the origin by the series
/// expansion of the solution.
const R_START: f64 = 1e-3;
/// Give up integrating (and call the trajectory undecided) past this radius.
const R_LIMIT: f64 = 60.0;
/// Bracketing trajectories are trusted while they agree to this relative
/// level.
const RELIABLE_SPLIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    /// `u` became negative: the shooting value was too large.
    CrossesZero,
    /// `u'` became positive while `u > 0`: too small.
    TurnsUp,
    /// Neither happened before `R_LIMIT`.
    Undecided,
}

#[inline]
fn rhs(p: f64, r: f64, u: f64, v: f64) -> (f64, f64) {
    (v, -2.0 * v / r + u - u.abs().powf(p - 1.0) * u)
}

/// Series start `u = a + b₂r² + b₄r⁴` valid near the origin.
fn series_start(p: f64, a: f64, r: f64) -> (f64, f64) {
    let f = a - a.powf(p);
    let fp = 1.0 - p * a.powf(p - 1.0);
    let b2 = f / 6.0;
    let b4 = fp * b2 / 20.0;
    (a + b2 * r * r + b4 * r.powi(4), 2.0 * b2 * r + 4.0 * b4 * r.powi(3))
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the fifth-order state and the error
/// estimate.
fn dp_step(p: f64, r: f64, y: (f64, f64), h: f64) -> ((f64, f64), f64) {
    let mut k = [(0.0, 0.0); 7];
    for s in 0..7 {
        let mut u = y.0;
        let mut v = y.1;
        for j in 0..s {
            u += h * A[s][j] * k[j].0;
            v += h * A[s][j] * k[j].1;
        }
        k[s] = rhs(p, r + C[s] * h, u, v);
    }
    let mut y5 = y;
    let mut e = (0.0, 0.0);
    for s in 0..7 {
        y5.0 += h * B5[s] * k[s].0;
        y5.1 += h * B5[s] * k[s].1;
        e.0 += h * (B5[s] - B4[s]) * k[s].0;
        e.1 += h * (B5[s] - B4[s]) * k[s].1;
    }
    let sc0 = 1e-15 + 1e-12 * y.0.abs().max(y5.0.abs());
    let sc1 = 1e-15 + 1e-12 * y.1.abs().max(y5.1.abs());
    let err = ((e.0 / sc0).powi(2) + (e.1 / sc1).powi(2)).sqrt() / 2f64.sqrt();
    (y5, err)
}

/// Integrates from the series start. With `record`, also lands on every
/// table node and stores `(u, u')` there, stopping at `r_stop`.
fn integrate(p: f64, a: f64, record: Option<(&mut Vec<(f64, f64)>, f64)>) -> Fate {
    let (mut table, r_stop) = match record {
        Some((t, stop)) => (Some(t), stop),
        None => (None, R_LIMIT),
    };
    // the origin node comes straight from the series
    if let Some(t) = table.as_deref_mut() {
        t.clear();
        t.push(series_start(p, a, 0.0));
    }
    let mut r = R_START;
    let mut y = series_start(p, a, r);
    let mut h: f64 = 1e-3;
    let max_step = if table.is_some() { TABLE_STEP } else { 0.25 };
    while r < r_stop {
        let mut step = h.min(max_step).min(r_stop - r);
        if let Some(t) = table.as_deref() {
            // land exactly on the next node
            let next = t.len() as f64 * TABLE_STEP;
            step = step.min(next - r);
        }
        let (y_new, err) = dp_step(p, r, y, step);
        if err <= 1.0 || step < 1e-10 {
            r += step;
            y = y_new;
            if let Some(t) = table.as_deref_mut() {
                if (r - t.len() as f64 * TABLE_STEP).abs() < 1e-12 {
                    t.push(y);
                }
            }
            if y.0 < 0.0 {
                return Fate::CrossesZero;
            }
            if y.1 > 0.0 {
                return Fate::TurnsUp;
            }
        }
        let factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
        h = step * factor.clamp(0.2, 5.0);
    }
    Fate::Undecided
}

/// Tabulated positive radial ground state with an exponential tail.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub p: f64,
    /// `U(0)`.
    pub u0: f64,
    /// Final width of the shooting bracket.
    pub bracket_width: f64,
    /// Table spacing.
    pub h: f64,
    /// End of the table; the tail `A e^{−r}/r` takes over beyond it.
    pub r_cut: f64,
    /// `A` in `U ≈ A e^{−r}/r`, matched by value at `r_cut`.
    pub tail_amplitude: f64,
    /// Decay rate from a free least-squares fit of `log(rU)` on the last
    /// unit of the table; the asymptote predicts 1.
    pub tail_rate_fit: f64,
    /// Largest `|U'' + 2U'/r − U + U^p|` over the table nodes.
    pub ode_residual: f64,
    #[serde(skip)]
    u: Vec<f64>,
    #[serde(skip)]
    du: Vec<f64>,
    /// `∫_0^{r_j} 4πs²U² ds` at each node.
    #[serde(skip)]
    cum_mass: Vec<f64>,
}

/// Shoots for the positive ground state with bisection on `U(0)` until the
/// bracket is narrower than `tol`.
pub fn shoot_ground_state(p: f64, tol: f64) -> Result<RadialProfile> {
    if !(p > 1.0 && p < 5.0) {
        return Err(Error::usage(format!("exponent p must lie in (1, 5), got {p}")));
    }
    if !(tol > 0.0) {
        return Err(Error::usage("shooting tolerance must be positive"));
    }
    let mut lo = 1.0;
    let mut hi = 10.0 * (p + 1.0).powf(1.0 / (p - 1.0));
    if integrate(p, hi, None) != Fate::CrossesZero {
        return Err(Error::Bracket(format!("U(0) = {hi} does not overshoot")));
    }
    if integrate(p, lo * (1.0 + 1e-9), None) == Fate::CrossesZero {
        return Err(Error::Bracket("lower shooting value already overshoots".into()));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match integrate(p, mid, None) {
            Fate::CrossesZero => hi = mid,
            Fate::TurnsUp | Fate::Undecided => lo = mid,
        }
    }
    let a = 0.5 * (lo + hi);

    let mut t_lo = Vec::new();
    let mut t_hi = Vec::new();
    let mut t_mid = Vec::new();
    integrate(p, lo, Some((&mut t_lo, R_LIMIT)));
    integrate(p, hi, Some((&mut t_hi, R_LIMIT)));
    integrate(p, a, Some((&mut t_mid, R_LIMIT)));
    let len = t_lo.len().min(t_hi.len()).min(t_mid.len());
    let mut cut = len - 1;
    for j in 1..len {
        let split = (t_lo[j].0 - t_hi[j].0).abs();
        if split > RELIABLE_SPLIT * t_mid[j].0.abs() || t_mid[j].0 <= 0.0 || t_mid[j].1 >= 0.0 {
            cut = j - 1;
            break;
        }
    }
    // keep a short safety margin off the unreliable region
    let cut = cut.saturating_sub((0.5 / TABLE_STEP) as usize);
    if (cut as f64) * TABLE_STEP < 3.0 {
        return Err(Error::Bracket(format!(
            "shooting trajectory reliable only up to r = {:.3}",
            cut as f64 * TABLE_STEP
        )));
    }
    t_mid.truncate(cut + 1);
    RadialProfile::from_table(p, a, hi - lo, t_mid)
}

impl RadialProfile {
    fn from_table(p: f64, u0: f64, bracket_width: f64, table: Vec<(f64, f64)>) -> Result<Self> {
        let h = TABLE_STEP;
        let (u, du): (Vec<f64>, Vec<f64>) = table.into_iter().unzip();
        let n = u.len();
        let r_cut = (n - 1) as f64 * h;
        let tail_amplitude = u[n - 1] * r_cut * r_cut.exp();

        // free fit of log(rU) = c − s r on the last unit of the table
        let w0 = n.saturating_sub((1.0 / h) as usize);
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for j in w0..n {
            let r = j as f64 * h;
            let y = (r * u[j]).ln();
            sx += r;
            sy += y;
            sxx += r * r;
            sxy += r * y;
        }
        let m = (n - w0) as f64;
        let tail_rate_fit = -(m * sxy - sx * sy) / (m * sxx - sx * sx);

        let ode_residual = ode_residual(p, h, &u, &du);

        let mut cum_mass = vec![0.0; n];
        for j in 1..n {
            let f = |k: usize| {
                let r = k as f64 * h;
                4.0 * PI * r * r * u[k] * u[k]
            };
            cum_mass[j] = cum_mass[j - 1] + 0.5 * h * (f(j - 1) + f(j));
        }
        Ok(Self {
            p,
            u0,
            bracket_width,
            h,
            r_cut,
            tail_amplitude,
            tail_rate_fit,
            ode_residual,
            u,
            du,
            cum_mass,
        })
    }

    /// Table radii.
    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.u.len()).map(|j| j as f64 * self.h)
    }

    pub fn table_u(&self) -> &[f64] {
        &self.u
    }

    pub fn table_du(&self) -> &[f64] {
        &self.du
    }

    /// `(U(r), U'(r))` from the cubic Hermite interpolant of the table and
    /// the exponential tail beyond it. `U` is even, so `|r|` is used.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        if r >= self.r_cut {
            let a = self.tail_amplitude;
            let e = a * (-r).exp() / r;
            return (e, -e * (1.0 + 1.0 / r));
        }
        let h = self.h;
        let j = ((r / h) as usize).min(self.u.len() - 2);
        let t = (r - j as f64 * h) / h;
        let (u0, u1) = (self.u[j], self.u[j + 1]);
        let (d0, d1) = (self.du[j] * h, self.du[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * d1;
        let der = ((6.0 * t2 - 6.0 * t) * u0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * u1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        (val, der)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// `∫_{|x| > R} U² / ∫ U²`.
    pub fn mass_fraction_outside(&self, radius: f64) -> f64 {
        let a = self.tail_amplitude;
        let tail_total = 2.0 * PI * a * a * (-2.0 * self.r_cut).exp();
        let total = self.cum_mass[self.cum_mass.len() - 1] + tail_total;
        let outside = if radius >= self.r_cut {
            2.0 * PI * a * a * (-2.0 * radius).exp()
        } else {
            let r = radius.max(0.0);
            let j = (r / self.h) as usize;
            let frac = (r - j as f64 * self.h) / self.h;
            let inside = self.cum_mass[j] + frac * (self.cum_mass[(j + 1).min(self.u.len() - 1)] - self.cum_mass[j]);
            total - inside
        };
        (outside / total).max(0.0)
    }
}

/// Residual of the radial ODE with `U''` from a sixth-order central
/// difference of the stored `U'` column (odd reflection at the origin).
fn ode_residual(p: f64, h: f64, u: &[f64], du: &[f64]) -> f64 {
    const W: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let n = u.len();
    let d = |k: isize| -> f64 {
        if k < 0 {
            -du[(-k) as usize]
        } else {
            du[k as usize]
        }
    };
    let mut worst: f64 = 0.0;
    for j in 0..n.saturating_sub(3) {
        let jj = j as isize;
        let upp = (1..=3)
            .map(|m| W[m - 1] * (d(jj + m as isize) - d(jj - m as isize)))
            .sum::<f64>()
            / h;
        let lap = if j == 0 {
            3.0 * upp
        } else {
            upp + 2.0 * du[j] / (j as f64 * h)
        };
        let res = lap - u[j] + u[j].powf(p);
        worst = worst.max(res.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_ground_state() {
        let prof = shoot_ground_state(3.0, 1e-12).unwrap();
        assert!((prof.u0 - 4.3374).abs() < 1e-3, "{}", prof.u0);
        assert!(prof.ode_residual < 1e-8, "{}", prof.ode_residual);
        assert!((prof.tail_rate_fit - 1.0).abs() < 0.02);
        assert!(prof.table_u().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(matches!(shoot_ground_state(5.0, 1e-8), Err(Error::Usage(_))));
        assert!(matches!(shoot_ground_state(1.0, 1e-8), Err(Error::Usage(_))));
    }

    #[test]
    fn interpolant_is_continuous_at_the_cut() {
        let prof = shoot_ground_state(2.0, 1e-12).unwrap();
        let below = prof.eval(prof.r_cut - 1e-9);
        let above = prof.eval(prof.r_cut + 1e-9);
        assert!((below.0 - above.0).abs() < 1e-8 * below.0);
        assert!(prof.mass_fraction_outside(0.0) > 0.999_999);
        assert!(prof.mass_fraction_outside(20.0) < 1e-12);
    }
}
