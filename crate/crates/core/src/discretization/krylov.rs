//! Matrix-free Krylov solvers.
//!
//! Operators are closures over flat coefficient vectors. `pcg` works with a
//! residual in the dual (nodal functional) representation and an SPD
//! preconditioner; `minres` and `lanczos_ritz` work in an arbitrary inner
//! product in which the operator is self-adjoint.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigenvalues;

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final residual relative to the right-hand side.
    pub relative_residual: f64,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Preconditioned conjugate gradients for `A x = b`.
///
/// Stops when `sqrt(rᵀ P⁻¹ r) <= tol * sqrt(bᵀ P⁻¹ b)`.
pub fn pcg(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
    solver: &'static str,
) -> Result<(Vec<f64>, KrylovStats)> {
    let n = rhs.len();
    let zb = precond(rhs);
    let bnorm = dot(rhs, &zb).max(0.0).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], KrylovStats::default()));
    }
    let (mut x, mut r) = match x0 {
        Some(x) => {
            let ax = apply(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            (x, r)
        }
        None => (vec![0.0; n], rhs.to_vec()),
    };
    let mut z = precond(&r);
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    for it in 0..=max_iter {
        let rel = rz.max(0.0).sqrt() / bnorm;
        if rel <= tol {
            return Ok((
                x,
                KrylovStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        if it == max_iter {
            return Err(Error::SolverFailure {
                solver,
                iterations: it,
                residual: rel,
            });
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure {
                solver,
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    unreachable!()
}

/// MINRES for `T x = b` where `T` is self-adjoint in `inner`.
///
/// Stops when the residual norm (in `inner`) drops below `tol * |b|`.
/// Follows the Paige–Saunders recurrence.
pub fn minres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut inner: impl FnMut(&[f64], &[f64]) -> f64,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    solver: &'static str,
) -> Result<(Vec<f64>, KrylovStats)> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let beta1 = inner(rhs, rhs).max(0.0).sqrt();
    if beta1 == 0.0 {
        return Ok((x, KrylovStats::default()));
    }
    let mut r1 = rhs.to_vec();
    let mut r2 = rhs.to_vec();
    let mut y = rhs.to_vec();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for it in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = apply(&v);
        if it >= 2 {
            axpy(&mut y, -beta / oldb, &r1);
        }
        let alfa = inner(&v, &y);
        axpy(&mut y, -alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = inner(&y, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
        }
        axpy(&mut x, phi, &w);
        let rel = phibar / beta1;
        if rel <= tol || beta == 0.0 {
            return Ok((
                x,
                KrylovStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
    }
    Err(Error::SolverFailure {
        solver,
        iterations: max_iter,
        residual: phibar / beta1,
    })
}

/// Ritz values of `T` (self-adjoint in `inner`) after `steps` Lanczos steps
/// with full reorthogonalization, sorted ascending.
pub fn lanczos_ritz(
    apply: impl FnMut(&[f64]) -> Vec<f64>,
    inner: impl FnMut(&[f64], &[f64]) -> f64,
    start: &[f64],
    steps: usize,
) -> Vec<f64> {
    lanczos_ritz_on(apply, inner, |_: &mut [f64]| {}, start, steps)
}

/// [`lanczos_ritz`] for an operator living on a subspace, with `restrict`
/// projecting onto it. Every new basis vector is projected again; otherwise
/// round-off along the complement, where a projected operator vanishes,
/// grows with the Lanczos recurrence and produces spurious Ritz values
/// near zero.
pub fn lanczos_ritz_on(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut inner: impl FnMut(&[f64], &[f64]) -> f64,
    mut restrict: impl FnMut(&mut [f64]),
    start: &[f64],
    steps: usize,
) -> Vec<f64> {
    let norm = inner(start, start).sqrt();
    if norm == 0.0 || steps == 0 {
        return Vec::new();
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / norm).collect()];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    for k in 0..steps {
        let mut w = apply(&basis[k]);
        let a = inner(&basis[k], &w);
        alphas.push(a);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            restrict(&mut w);
            for q in &basis {
                let c = inner(q, &w);
                axpy(&mut w, -c, q);
            }
        }
        let b = inner(&w, &w).max(0.0).sqrt();
        if k + 1 == steps || b < 1e-12 * a.abs().max(1.0) {
            break;
        }
        betas.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    tridiagonal_eigenvalues(&alphas, &betas[..alphas.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> impl Fn(&[f64]) -> Vec<f64> {
        move |x: &[f64]| {
            (0..n)
                .map(|i| {
                    let mut v = (2.0 + i as f64 * 0.1) * x[i];
                    if i > 0 {
                        v -= 0.5 * x[i - 1];
                    }
                    if i + 1 < n {
                        v -= 0.5 * x[i + 1];
                    }
                    v
                })
                .collect()
        }
    }

    #[test]
    fn pcg_solves_spd_system() {
        let n = 30;
        let a = spd(n);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a(&xs);
        let (x, stats) = pcg(&a, |r: &[f64]| r.to_vec(), &b, None, 1e-12, 200, "cg").unwrap();
        assert!(stats.iterations > 0);
        for (p, q) in x.iter().zip(&xs) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn minres_handles_indefinite_operator() {
        let n = 20;
        let a = move |x: &[f64]| -> Vec<f64> {
            (0..n).map(|i| (i as f64 - 4.5) * x[i]).collect()
        };
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let (x, _) = minres(&a, dot, &b, 1e-12, 100, "minres").unwrap();
        let ax = a(&x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn lanczos_recovers_extreme_eigenvalues() {
        let n = 12;
        let a = move |x: &[f64]| -> Vec<f64> { (0..n).map(|i| (i as f64 - 3.0) * x[i]).collect() };
        let start = vec![1.0; n];
        let ritz = lanczos_ritz(a, dot, &start, n);
        assert!((ritz[0] + 3.0).abs() < 1e-9);
        assert!((ritz[ritz.len() - 1] - 8.0).abs() < 1e-9);
    }
}
