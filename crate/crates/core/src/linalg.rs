//! Small dense linear algebra: 3×3 symmetric solves and symmetric
//! eigenvalue routines used for Gram matrices, Hessians of J̃ and Ritz
//! values.

/// LDLᵀ factorization of a symmetric matrix with symmetric diagonal
/// pivoting (largest remaining diagonal first).
#[derive(Debug, Clone)]
pub struct Ldlt<const N: usize> {
    perm: [usize; N],
    l: [[f64; N]; N],
    d: [f64; N],
}

impl<const N: usize> Ldlt<N> {
    /// Returns `None` when a pivot vanishes.
    pub fn new(a: &[[f64; N]; N]) -> Option<Self> {
        let mut m = *a;
        let mut perm: [usize; N] = std::array::from_fn(|i| i);
        let mut l = [[0.0; N]; N];
        let mut d = [0.0; N];
        for k in 0..N {
            // choose the largest remaining diagonal entry
            let mut p = k;
            for i in k + 1..N {
                if m[i][i].abs() > m[p][p].abs() {
                    p = i;
                }
            }
            if p != k {
                m.swap(p, k);
                for row in m.iter_mut() {
                    row.swap(p, k);
                }
                perm.swap(p, k);
                l.swap(p, k);
                for row in l.iter_mut() {
                    row.swap(p, k);
                }
            }
            let dk = m[k][k];
            if dk == 0.0 || !dk.is_finite() {
                return None;
            }
            d[k] = dk;
            l[k][k] = 1.0;
            for i in k + 1..N {
                l[i][k] = m[i][k] / dk;
            }
            for i in k + 1..N {
                for j in k + 1..N {
                    m[i][j] -= l[i][k] * dk * l[j][k];
                }
            }
        }
        Some(Self { perm, l, d })
    }

    pub fn solve(&self, b: &[f64; N]) -> [f64; N] {
        let mut y: [f64; N] = std::array::from_fn(|i| b[self.perm[i]]);
        for i in 0..N {
            for j in 0..i {
                y[i] -= self.l[i][j] * y[j];
            }
        }
        for i in 0..N {
            y[i] /= self.d[i];
        }
        for i in (0..N).rev() {
            for j in i + 1..N {
                y[i] -= self.l[j][i] * y[j];
            }
        }
        let mut x = [0.0; N];
        for i in 0..N {
            x[self.perm[i]] = y[i];
        }
        x
    }

    /// Ratio of the largest to smallest pivot magnitude; a cheap condition
    /// estimate for well-scaled symmetric positive definite input.
    pub fn pivot_ratio(&self) -> f64 {
        let max = self.d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = self.d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        max / min
    }
}

/// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix by
/// cyclic Jacobi rotations.
pub fn symmetric_eigen<const N: usize>(a: &[[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut m = *a;
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..N).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..N {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let vals = std::array::from_fn(|i| m[order[i]][order[i]]);
    let mut vecs = [[0.0; N]; N];
    for (r, row) in vecs.iter_mut().enumerate() {
        for c in 0..N {
            row[c] = v[r][order[c]];
        }
    }
    (vals, vecs)
}

/// Singular values (ascending) of a square matrix, via the eigenvalues of
/// `AᵀA`.
pub fn singular_values<const N: usize>(a: &[[f64; N]; N]) -> [f64; N] {
    let mut ata = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            ata[i][j] = (0..N).map(|k| a[k][i] * a[k][j]).sum();
        }
    }
    let (vals, _) = symmetric_eigen(&ata);
    vals.map(|v| v.max(0.0).sqrt())
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`
/// (Sturm count).
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        q = alpha[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (alpha[i].abs() + x.abs()).max(1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, ascending, by bisection.
pub fn tridiagonal_eigenvalues(alpha: &[f64], beta: &[f64]) -> Vec<f64> {
    let n = alpha.len();
    if n == 0 {
        return Vec::new();
    }
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 }
            + if i + 1 < n { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let span = (hi - lo).max(1e-300);
    (0..n)
        .map(|k| {
            let (mut a, mut b) = (lo - 1e-12 * span, hi + 1e-12 * span);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                if sturm_count(alpha, beta, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}
