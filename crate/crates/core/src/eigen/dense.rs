//! Dense symmetric eigensolver: Householder tridiagonalization, implicit QL
//! for the eigenvalues, inverse iteration for the requested eigenvectors.

use rayon::prelude::*;

pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples `i` and `i + 1`.
    pub off: Vec<f64>,
    /// Householder vectors `(β_k, v_k)` acting on indices `k+1..n`.
    reflectors: Vec<(f64, Vec<f64>)>,
}

/// Reduces the row-major symmetric matrix `a` (destroyed) to tridiagonal form.
pub fn tridiagonalize(mut a: Vec<f64>, n: usize) -> Tridiagonal {
    assert_eq!(a.len(), n * n);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    if n == 0 {
        return Tridiagonal { diag, off, reflectors };
    }
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let x: Vec<f64> = a[k * n + lo..(k + 1) * n].to_vec();
        let xn = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        diag[k] = a[k * n + k];
        if xn == 0.0 {
            off[k] = 0.0;
            reflectors.push((0.0, Vec::new()));
            continue;
        }
        let alpha = if x[0] > 0.0 { -xn } else { xn };
        let mut v = x;
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        let beta = 2.0 / vtv;
        let p: Vec<f64> = a[lo * n..]
            .par_chunks(n)
            .map(|row| beta * row[lo..].iter().zip(&v).map(|(r, s)| r * s).sum::<f64>())
            .collect();
        let kk = 0.5 * beta * v.iter().zip(&p).map(|(s, t)| s * t).sum::<f64>();
        let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();
        a[lo * n..].par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let (vr, wr) = (v[r], w[r]);
            for ((x, vj), wj) in row[lo..].iter_mut().zip(&v).zip(&w) {
                *x -= vr * wj + wr * vj;
            }
        });
        off[k] = alpha;
        reflectors.push((beta, v));
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + n - 2];
        off[n - 2] = a[(n - 1) * n + n - 2];
    }
    diag[n - 1] = a[(n - 1) * n + n - 1];
    Tridiagonal { diag, off, reflectors }
}

impl Tridiagonal {
    /// From explicit diagonals (no reflectors).
    pub fn from_parts(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        Self {
            diag,
            off,
            reflectors: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn norm_bound(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.off[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    /// Applies the accumulated orthogonal transformation `Q` to `y`.
    pub fn back_transform(&self, y: &mut [f64]) {
        for (k, (beta, v)) in self.reflectors.iter().enumerate().rev() {
            if v.is_empty() {
                continue;
            }
            let seg = &mut y[k + 1..];
            let s: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * beta;
            for (a, b) in seg.iter_mut().zip(v) {
                *a -= s * b;
            }
        }
    }
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending.
pub fn tql1(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, usize> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(l);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// LU factors of `T − σI` with partial pivoting.
struct TriLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swap: Vec<bool>,
}

fn factor(t: &Tridiagonal, sigma: f64, tiny: f64) -> TriLu {
    let n = t.n();
    let mut f = TriLu {
        u0: vec![0.0; n],
        u1: vec![0.0; n],
        u2: vec![0.0; n],
        l: vec![0.0; n],
        swap: vec![false; n],
    };
    let mut p0 = t.diag[0] - sigma;
    let mut p1 = if n > 1 { t.off[0] } else { 0.0 };
    let mut p2 = 0.0;
    for i in 0..n.saturating_sub(1) {
        let sub = t.off[i];
        let nd = t.diag[i + 1] - sigma;
        let ns = if i + 2 < n { t.off[i + 1] } else { 0.0 };
        if p0.abs() >= sub.abs() {
            let p = if p0 == 0.0 { tiny } else { p0 };
            let l = sub / p;
            f.u0[i] = p;
            f.u1[i] = p1;
            f.u2[i] = p2;
            f.l[i] = l;
            p0 = nd - l * p1;
            p1 = ns - l * p2;
        } else {
            let l = p0 / sub;
            f.u0[i] = sub;
            f.u1[i] = nd;
            f.u2[i] = ns;
            f.l[i] = l;
            f.swap[i] = true;
            p0 = p1 - l * nd;
            p1 = p2 - l * ns;
        }
        p2 = 0.0;
    }
    f.u0[n - 1] = if p0 == 0.0 { tiny } else { p0 };
    f
}

fn solve(f: &TriLu, x: &mut [f64]) {
    let n = x.len();
    for i in 0..n.saturating_sub(1) {
        if f.swap[i] {
            x.swap(i, i + 1);
        }
        x[i + 1] -= f.l[i] * x[i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        if i + 1 < n {
            s -= f.u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= f.u2[i] * x[i + 2];
        }
        x[i] = s / f.u0[i];
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let s = x.iter().map(|t| t * t).sum::<f64>().sqrt();
    if s > 0.0 {
        x.iter_mut().for_each(|t| *t /= s);
    }
    s
}

/// Eigenvectors of the tridiagonal matrix for the given ascending
/// eigenvalues, by inverse iteration with reorthogonalization against the
/// vectors already found.
pub fn tridiagonal_eigenvectors(t: &Tridiagonal, evals: &[f64]) -> Vec<Vec<f64>> {
    let n = t.n();
    let norm = t.norm_bound().max(f64::MIN_POSITIVE);
    let sep = 10.0 * f64::EPSILON * norm;
    let tiny = f64::EPSILON * norm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(evals.len());
    let mut last_shift = f64::NEG_INFINITY;
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for &lam in evals {
        let mut sigma = lam;
        if sigma - last_shift < sep {
            sigma = last_shift + sep;
        }
        last_shift = sigma;
        let f = factor(t, sigma, tiny);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut x);
        for _ in 0..4 {
            solve(&f, &mut x);
            for _pass in 0..2 {
                for y in &out {
                    let c: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                    x.iter_mut().zip(y).for_each(|(a, b)| *a -= c * b);
                }
            }
            normalize(&mut x);
        }
        out.push(x);
    }
    out
}

/// The `count` lowest eigenpairs of a dense symmetric matrix.
pub fn lowest_eigenpairs(a: Vec<f64>, n: usize, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), usize> {
    let t = tridiagonalize(a, n);
    lowest_tridiagonal(&t, count)
}

pub fn lowest_tridiagonal(t: &Tridiagonal, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), usize> {
    let all = tql1(&t.diag, &t.off)?;
    let vals: Vec<f64> = all[..count.min(all.len())].to_vec();
    let mut vecs = tridiagonal_eigenvectors(t, &vals);
    for v in vecs.iter_mut() {
        t.back_transform(v);
    }
    Ok((vals, vecs))
}
