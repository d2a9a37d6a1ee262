//! Thick-restart Lanczos with full reorthogonalization and a locked
//! deflation space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::small::sym_eig;
use crate::par;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Number of lowest eigenpairs wanted (outside the deflation space).
    pub nev: usize,
    /// Basis size per cycle.
    pub max_basis: usize,
    pub tol: f64,
    /// Maximum number of operator applications.
    pub max_matvecs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct LanczosOutcome {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Residual estimates `β|s_last|` from the final cycle.
    pub estimates: Vec<f64>,
    pub matvecs: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Rebuilds forced by loss of orthogonality in the kept block.
    pub orthogonality_restarts: usize,
    /// Lowest Ritz value at the end of each cycle.
    pub history: Vec<f64>,
}

/// Classical Gram–Schmidt against `locked ∪ basis`, two passes; returns the
/// total coefficients on `basis`.
fn orthogonalize(w: &mut [f64], locked: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _pass in 0..2 {
        let dl: Vec<f64> = locked.iter().map(|b| par::dot(b, w)).collect();
        let d: Vec<f64> = basis.iter().map(|b| par::dot(b, w)).collect();
        for (b, di) in locked.iter().zip(&dl).chain(basis.iter().zip(&d)) {
            par::axpy(-di, b, w);
        }
        for (c, di) in coef.iter_mut().zip(d) {
            *c += di;
        }
    }
    coef
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, locked: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, locked, basis);
        let nv = par::norm(&v);
        if nv > 1e-8 {
            par::scale(1.0 / nv, &mut v);
            return v;
        }
    }
}

fn combine(basis: &[Vec<f64>], coef: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for (j, b) in basis.iter().enumerate() {
        par::axpy(coef(j), b, &mut y);
    }
    y
}

/// Lowest eigenpairs of the symmetric operator `apply` restricted to the
/// orthogonal complement of the orthonormal set `locked`.
pub fn lanczos(n: usize, apply: impl Fn(&[f64], &mut [f64]), locked: &[Vec<f64>], opts: &LanczosOptions) -> LanczosOutcome {
    let room = n.saturating_sub(locked.len());
    let nev = opts.nev.min(room);
    let m = opts.max_basis.max(nev + 8).min(room);
    let keep = (nev + (m - nev) / 3).min(m.saturating_sub(2)).max(nev);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut h = vec![vec![0.0; m]; m];
    let mut basis: Vec<Vec<f64>> = vec![random_unit(n, &mut rng, locked, &[])];
    let mut w = vec![0.0; n];
    let mut out = LanczosOutcome {
        values: Vec::new(),
        vectors: Vec::new(),
        estimates: Vec::new(),
        matvecs: 0,
        restarts: 0,
        converged: false,
        orthogonality_restarts: 0,
        history: Vec::new(),
    };
    loop {
        let mut beta;
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            out.matvecs += 1;
            let coef = orthogonalize(&mut w, locked, &basis);
            for (i, c) in coef.iter().enumerate() {
                h[i][j] = *c;
                h[j][i] = *c;
            }
            beta = par::norm(&w);
            if j + 1 == m {
                break;
            }
            let scale = (0..=j).map(|i| h[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            if beta <= 1e-12 * scale {
                w.iter_mut().for_each(|x| *x = 0.0);
                let v = random_unit(n, &mut rng, locked, &basis);
                basis.push(v);
            } else {
                let mut v = w.clone();
                par::scale(1.0 / beta, &mut v);
                basis.push(v);
            }
        }
        let hm: Vec<Vec<f64>> = h.iter().map(|r| r[..m].to_vec()).collect();
        let (theta, s) = sym_eig(&hm);
        let est: Vec<f64> = (0..m).map(|i| beta * s[m - 1][i].abs()).collect();
        out.history.push(theta[0]);
        let conv = (0..nev).all(|i| est[i] <= opts.tol * (1.0 + theta[i].abs()));
        if conv || out.matvecs >= opts.max_matvecs {
            out.vectors = (0..nev).map(|i| combine(&basis, |j| s[j][i], n)).collect();
            out.values = theta[..nev].to_vec();
            out.estimates = est[..nev].to_vec();
            out.converged = conv;
            return out;
        }
        let mut kept: Vec<Vec<f64>> = (0..keep).map(|i| combine(&basis, |j| s[j][i], n)).collect();
        let mut worst: f64 = 0.0;
        for a in 0..kept.len() {
            for b in 0..a {
                worst = worst.max(par::dot(&kept[a], &kept[b]).abs());
            }
            for l in locked {
                worst = worst.max(par::dot(&kept[a], l).abs());
            }
        }
        if worst > 1e-8 {
            out.orthogonality_restarts += 1;
            let mut rebuilt: Vec<Vec<f64>> = Vec::with_capacity(keep);
            for mut y in kept.drain(..) {
                orthogonalize(&mut y, locked, &rebuilt);
                let ny = par::norm(&y);
                par::scale(1.0 / ny, &mut y);
                rebuilt.push(y);
            }
            kept = rebuilt;
        }
        for row in h.iter_mut() {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
        for (i, t) in theta[..keep].iter().enumerate() {
            h[i][i] = *t;
        }
        let fresh = if beta > 0.0 {
            let mut f = w.clone();
            orthogonalize(&mut f, locked, &kept);
            let nf = par::norm(&f);
            if nf > 1e-8 * beta {
                par::scale(1.0 / nf, &mut f);
                f
            } else {
                random_unit(n, &mut rng, locked, &kept)
            }
        } else {
            random_unit(n, &mut rng, locked, &kept)
        };
        kept.push(fresh);
        basis = kept;
        out.restarts += 1;
    }
}
