//! Low-lying spectrum of walk and Witten operators.

pub mod dense;
pub mod lanczos;
pub mod quasimode;
pub mod small;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{GridOperator, OperatorKind};
use crate::par;

pub use quasimode::{build_quasimodes, principal_cosines, QuasimodeSet};

pub const DEFAULT_DENSE_CUTOFF: usize = 3000;
pub const MAX_COUNT: usize = 20;
const TRIDIAGONAL_CUTOFF: usize = 20_000;
/// Gap ratio that separates the exponentially small cluster.
pub const CLUSTER_RATIO: f64 = 1e3;
/// Cluster eigenvalues must lie below this multiple of `h`.
pub const CLUSTER_CAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Solver {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub h: f64,
    pub eigenvalues: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub n_small: usize,
    pub cluster_threshold: f64,
    pub next_eigenvalue: f64,
    pub solver: Solver,
    pub iterations: usize,
    /// False when returned as partial results.
    pub converged: bool,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Error)]
pub enum EigenError {
    #[error("operator kind {0} is not supported (expected WALK_P or WITTEN0)")]
    Kind(&'static str),
    #[error("count {0} out of range 2..={MAX_COUNT}")]
    Count(usize),
    #[error("no convergence after {max_iter} operator applications")]
    NoConvergence { max_iter: usize, partial: Box<SpectralResult> },
    #[error("repeated loss of orthogonality ({0} rebuilds)")]
    LossOfOrthogonality(usize),
    #[error("dense eigensolver failed to converge at index {0}")]
    Dense(usize),
    #[error("no gap ratio >= {CLUSTER_RATIO} below {cap:e}; eigenvalues {eigenvalues:?}")]
    AmbiguousCluster { cap: f64, eigenvalues: Vec<f64> },
    #[error("quasimode {0} has empty support (epsilon too large)")]
    EmptySupport(usize),
    #[error("epsilon {eps} must lie in (0, {eps0})")]
    Epsilon { eps: f64, eps0: f64 },
    #[error("dimension mismatch between grid and labeling")]
    DimensionMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub dense_cutoff: usize,
    pub max_basis: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            dense_cutoff: DEFAULT_DENSE_CUTOFF,
            max_basis: 80,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_small: usize,
    pub cluster_threshold: f64,
    pub next_eigenvalue: f64,
    pub next_over_h: f64,
    pub gap_ratio: f64,
    pub matches_expected: Option<bool>,
}

/// `count` lowest eigenvalues of `op` with the default solver options.
pub fn smallest_eigs(op: &GridOperator, count: usize, tol: f64, max_iter: usize) -> Result<SpectralResult, EigenError> {
    smallest_eigs_with(
        op,
        count,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

pub fn smallest_eigs_with(op: &GridOperator, count: usize, opts: &SolverOptions) -> Result<SpectralResult, EigenError> {
    if op.kind == OperatorKind::WalkT {
        return Err(EigenError::Kind(op.kind.label()));
    }
    if !(2..=MAX_COUNT).contains(&count) {
        return Err(EigenError::Count(count));
    }
    let n = op.n();
    let count = count.min(n);
    let kernel = op.stationary_sqrt.clone();
    // 1D Witten operators are tridiagonal; QL on the tridiagonal is cheap
    // well beyond the dense cutoff.
    let tridiagonal = op.kind == OperatorKind::Witten0 && op.grid.dim() == 1 && n <= TRIDIAGONAL_CUTOFF;
    let (solver, raw, iterations, converged) = if tridiagonal || n <= opts.dense_cutoff {
        let csr = op.to_csr();
        let (_, vecs) = if tridiagonal {
            let diag = (0..n).map(|i| csr.get(i, i)).collect();
            let off = (0..n - 1).map(|i| csr.get(i, i + 1)).collect();
            dense::lowest_tridiagonal(&dense::Tridiagonal::from_parts(diag, off), count)
        } else {
            dense::lowest_eigenpairs(csr.to_dense(), n, count)
        }
        .map_err(EigenError::Dense)?;
        (Solver::Dense, vecs.into_iter().skip(1).collect::<Vec<_>>(), 1, true)
    } else {
        let lopts = lanczos::LanczosOptions {
            nev: count - 1,
            max_basis: opts.max_basis,
            tol: opts.tol,
            max_matvecs: opts.max_iter,
            seed: opts.seed,
        };
        let out = lanczos::lanczos(n, |u, y| op.matvec(u, y), std::slice::from_ref(&kernel), &lopts);
        if out.orthogonality_restarts > 3 {
            return Err(EigenError::LossOfOrthogonality(out.orthogonality_restarts));
        }
        (Solver::Lanczos, out.vectors, out.matvecs, out.converged)
    };
    let (vals, vecs) = refine(op, &kernel, raw);
    let mut eigenvalues = vec![0.0];
    eigenvalues.extend(vals);
    let mut vectors = vec![kernel];
    vectors.extend(vecs);
    let residual_norms = residuals(op, &eigenvalues, &vectors);
    let mut res = SpectralResult {
        h: op.h,
        eigenvalues,
        residual_norms,
        n_small: 1,
        cluster_threshold: 0.0,
        next_eigenvalue: 0.0,
        solver,
        iterations,
        converged,
        vectors,
    };
    fill_cluster(&mut res);
    if !converged {
        return Err(EigenError::NoConvergence {
            max_iter: opts.max_iter,
            partial: Box::new(res),
        });
    }
    Ok(res)
}

fn residuals(op: &GridOperator, vals: &[f64], vecs: &[Vec<f64>]) -> Vec<f64> {
    let mut y = vec![0.0; op.n()];
    vals.iter()
        .zip(vecs)
        .map(|(l, v)| {
            op.matvec(v, &mut y);
            par::sum(v.len(), |i| (y[i] - l * v[i]).powi(2)).sqrt()
        })
        .collect()
}

/// Rayleigh–Ritz on the span of `raw` (after removing the kernel direction)
/// with the quadratic form evaluated edge by edge, so that exponentially
/// small eigenvalues keep relative accuracy.
fn refine(op: &GridOperator, kernel: &[f64], raw: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = kernel.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(raw.len());
    for mut x in raw {
        for _pass in 0..2 {
            let c = par::dot(kernel, &x);
            par::axpy(-c, kernel, &mut x);
            for b in &q {
                let c = par::dot(b, &x);
                par::axpy(-c, b, &mut x);
            }
        }
        let nx = par::norm(&x);
        if nx > 1e-6 {
            par::scale(1.0 / nx, &mut x);
            q.push(x);
        }
    }
    let g = op.dirichlet_gram(&q);
    let (vals, s) = small::sym_eig(&g);
    let vecs = (0..q.len())
        .map(|i| {
            let mut y = vec![0.0; n];
            for (j, b) in q.iter().enumerate() {
                par::axpy(s[j][i], b, &mut y);
            }
            let c = par::dot(kernel, &y);
            par::axpy(-c, kernel, &mut y);
            let ny = par::norm(&y);
            par::scale(1.0 / ny, &mut y);
            y
        })
        .collect();
    (vals.into_iter().map(|v| v.max(0.0)).collect(), vecs)
}

fn fill_cluster(res: &mut SpectralResult) {
    match classify_spectrum(res, res.h, None) {
        Ok(c) => {
            res.n_small = c.n_small;
            res.cluster_threshold = c.cluster_threshold;
            res.next_eigenvalue = c.next_eigenvalue;
        }
        Err(_) => {
            res.n_small = 1;
            res.cluster_threshold = 0.0;
            res.next_eigenvalue = res.eigenvalues.get(1).copied().unwrap_or(f64::INFINITY);
        }
    }
}

/// Splits the spectrum after the exponentially small cluster: the split is
/// placed after the highest `λ_i ≤ 0.1·h` (`i ≥ 1`) with `λ_{i+1}/λ_i ≥ 10³`,
/// or after `λ_0` (counted as `1e-14`) when no such `i` exists and `λ_1`
/// lies above `0.1·h`.
pub fn classify_spectrum(res: &SpectralResult, h: f64, n0_expected: Option<usize>) -> Result<ClusterReport, EigenError> {
    let ev = &res.eigenvalues;
    let cap = CLUSTER_CAP * h;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..ev.len().saturating_sub(1) {
        let lo = if i == 0 { ev[0].max(1e-14) } else { ev[i] };
        if ev[i] > cap || lo <= 0.0 {
            continue;
        }
        let ratio = ev[i + 1] / lo;
        if ratio >= CLUSTER_RATIO && (i > 0 || ev[1] > cap) {
            best = Some((i, ratio));
        }
    }
    let (i, ratio) = best.ok_or_else(|| EigenError::AmbiguousCluster {
        cap,
        eigenvalues: ev.clone(),
    })?;
    let lo = if i == 0 { ev[0].max(1e-14) } else { ev[i] };
    let next = ev[i + 1];
    Ok(ClusterReport {
        n_small: i + 1,
        cluster_threshold: (lo * next).sqrt(),
        next_eigenvalue: next,
        next_over_h: next / h,
        gap_ratio: ratio,
        matches_expected: n0_expected.map(|n0| n0 == i + 1),
    })
}

/// Second eigenvalue of the walk operator `S` by power iteration on the
/// complement of its top eigenvector.
pub fn power_second_eigenvalue(op_t: &GridOperator, max_iter: usize, tol: f64) -> f64 {
    let v = &op_t.stationary_sqrt;
    let n = v.len();
    let mut x: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) * 0.618_033_988_75).fract() - 0.5).collect();
    let mut y = vec![0.0; n];
    let mut lam = 0.0;
    for _ in 0..max_iter {
        let c = par::dot(v, &x);
        par::axpy(-c, v, &mut x);
        let nx = par::norm(&x);
        par::scale(1.0 / nx, &mut x);
        op_t.matvec(&x, &mut y);
        let new = par::dot(&x, &y);
        std::mem::swap(&mut x, &mut y);
        if (new - lam).abs() <= tol * new.abs() {
            return new;
        }
        lam = new;
    }
    lam
}
