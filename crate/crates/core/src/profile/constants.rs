use std::f64::consts::PI;

use serde::Serialize;

use super::shoot::RadialProfile;

/// Integrals of the ground state and the constants of the reduced expansion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileConstants {
    pub p: f64,
    /// `(½ − 1/(p+1)) ‖U‖^{p+1}_{p+1}`
    pub c0: f64,
    /// `(p+1)/(p−1) − 3/2`
    pub theta: f64,
    /// `min(1, p−1)`
    pub mu: f64,
    /// `‖U‖²_{L²}`
    pub l2_sq: f64,
    /// `‖U‖^{p+1}_{L^{p+1}}`
    pub lp1: f64,
    /// `‖∇U‖²_{L²}`
    pub d12_sq: f64,
    /// `∫|x|²U²`
    pub moment2: f64,
    /// `∫|x|⁴U²`
    pub moment4: f64,
}

impl ProfileConstants {
    /// Leading term `C₀ V^θ` of the reduced functional.
    pub fn leading(&self, v: f64) -> f64 {
        self.c0 * v.powf(self.theta)
    }

    /// `a = θ C₀ V^{θ−1}`, so that `∇(C₀V(εz)^θ) = ε a ∇V(εz)`.
    pub fn envelope_slope(&self, v: f64) -> f64 {
        self.theta * self.c0 * v.powf(self.theta - 1.0)
    }
}

/// Three-point Gauss–Legendre nodes and weights on [−1, 1].
const GL: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// `∫_0^∞ 4πr² f(r, U, U') dr` over the table intervals and the tail.
pub(crate) fn radial_integral(prof: &RadialProfile, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let panel = |a: f64, b: f64| -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GL.iter()
            .map(|&(x, w)| {
                let r = mid + half * x;
                let (u, du) = prof.eval(r);
                w * 4.0 * PI * r * r * f(r, u, du)
            })
            .sum::<f64>()
            * half
    };
    let n = (prof.r_cut / prof.h).round() as usize;
    let mut total = 0.0;
    for j in 0..n {
        total += panel(j as f64 * prof.h, (j + 1) as f64 * prof.h);
    }
    // the tail decays like e^{−2r}; 40 units is far below round-off
    let step = 0.02;
    let m = (40.0 / step) as usize;
    for j in 0..m {
        let a = prof.r_cut + j as f64 * step;
        total += panel(a, a + step);
    }
    total
}

pub fn profile_constants(prof: &RadialProfile) -> ProfileConstants {
    let p = prof.p;
    let l2_sq = radial_integral(prof, |_, u, _| u * u);
    let lp1 = radial_integral(prof, |_, u, _| u.abs().powf(p + 1.0));
    let d12_sq = radial_integral(prof, |_, _, du| du * du);
    let moment2 = radial_integral(prof, |r, u, _| r * r * u * u);
    let moment4 = radial_integral(prof, |r, u, _| r.powi(4) * u * u);
    ProfileConstants {
        p,
        c0: (0.5 - 1.0 / (p + 1.0)) * lp1,
        theta: (p + 1.0) / (p - 1.0) - 1.5,
        mu: (p - 1.0).min(1.0),
        l2_sq,
        lp1,
        d12_sq,
        moment2,
        moment4,
    }
}
