//! Cutoff Gibbs states attached to each well.

use serde::{Deserialize, Serialize};

use super::small::sym_eig;
use super::EigenError;
use crate::discretize::Grid;
use crate::landscape::LandscapeLabeling;
use crate::par;
use crate::potential::PotentialSpec;

/// Collar width is `ε / MOLLIFIER_C0`.
pub const MOLLIFIER_C0: f64 = 4.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasimodeSet {
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub gram: Vec<Vec<f64>>,
    /// Discrete normalization constants `b_k`.
    pub b: Vec<f64>,
    /// Stationary-phase values `(πh)^{-d/4} det(φ''(m_k))^{1/4}`.
    pub b_stationary_phase: Vec<f64>,
}

impl QuasimodeSet {
    pub fn max_off_diagonal(&self) -> f64 {
        let k = self.gram.len();
        let mut m: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    m = m.max(self.gram[i][j].abs());
                }
            }
        }
        m
    }
}

/// Smallest distance between distinct critical points, divided by 10.
pub fn epsilon_margin(labeling: &LandscapeLabeling) -> f64 {
    let pts = &labeling.critical_points;
    let mut d = f64::INFINITY;
    for i in 0..pts.len() {
        for j in 0..i {
            d = d.min(pts[i].distance_to(&pts[j].location));
        }
    }
    d / 10.0
}

fn ramp(r: f64, eps: f64) -> f64 {
    if r <= eps {
        return 0.0;
    }
    let t = (r - eps) / (eps / MOLLIFIER_C0);
    if t >= 1.0 {
        1.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

/// Quasimodes `b_k χ_{k,ε} e^{-(φ - φ(m_k))/h}` on `grid`.
pub fn build_quasimodes(
    grid: &Grid,
    spec: &PotentialSpec,
    labeling: &LandscapeLabeling,
    h: f64,
    eps: f64,
) -> Result<QuasimodeSet, EigenError> {
    if grid.dim() != labeling.grid.dim() || spec.dimension() != grid.dim() {
        return Err(EigenError::DimensionMismatch);
    }
    let eps0 = epsilon_margin(labeling);
    if !(eps > 0.0 && eps < eps0) {
        return Err(EigenError::Epsilon { eps, eps0 });
    }
    let n = grid.len();
    let d = grid.dim() as i32;
    let phi = grid.sample(|x| spec.value(x));
    let landscape_cell: Vec<usize> = (0..n).map(|i| labeling.grid.nearest_cell(&grid.point(i)[..grid.dim()])).collect();
    let mut vectors = Vec::with_capacity(labeling.pairs.len());
    let mut b = Vec::with_capacity(labeling.pairs.len());
    let mut b_sp = Vec::with_capacity(labeling.pairs.len());
    for (k, pair) in labeling.pairs.iter().enumerate() {
        let fm = pair.minimum.value;
        let chi: Vec<f64> = match &pair.saddle {
            None => vec![1.0; n],
            Some(s) => {
                let mask = labeling.well_mask(k);
                (0..n)
                    .map(|i| {
                        if mask[landscape_cell[i]] {
                            ramp(s.distance_to(&grid.point(i)[..grid.dim()]), eps)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        };
        let mut f: Vec<f64> = (0..n).map(|i| chi[i] * (-(phi[i] - fm) / h).exp()).collect();
        let norm = par::norm(&f);
        if norm == 0.0 || !norm.is_finite() {
            return Err(EigenError::EmptySupport(k));
        }
        par::scale(1.0 / norm, &mut f);
        b.push(1.0 / (norm * grid.cell_volume().sqrt()));
        b_sp.push((std::f64::consts::PI * h).powf(-d as f64 / 4.0) * pair.minimum.hessian_det.powf(0.25));
        vectors.push(f);
    }
    let gram = (0..vectors.len())
        .map(|i| (0..vectors.len()).map(|j| par::dot(&vectors[i], &vectors[j])).collect())
        .collect();
    Ok(QuasimodeSet {
        vectors,
        epsilon: eps,
        gram,
        b,
        b_stationary_phase: b_sp,
    })
}

fn orthonormal(xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(xs.len());
    for x in xs {
        let mut y = x.clone();
        for _pass in 0..2 {
            for b in &q {
                let c = par::dot(b, &y);
                par::axpy(-c, b, &mut y);
            }
        }
        let ny = par::norm(&y);
        if ny > 1e-12 * par::norm(x).max(f64::MIN_POSITIVE) {
            par::scale(1.0 / ny, &mut y);
            q.push(y);
        }
    }
    q
}

/// Cosines of the principal angles between `span(a)` and `span(b)`,
/// descending.
pub fn principal_cosines(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let qa = orthonormal(a);
    let qb = orthonormal(b);
    let m: Vec<Vec<f64>> = qa.iter().map(|x| qb.iter().map(|y| par::dot(x, y)).collect()).collect();
    let k = qa.len().min(qb.len());
    // Singular values from the smaller Gram matrix.
    let g: Vec<Vec<f64>> = if qa.len() <= qb.len() {
        (0..qa.len())
            .map(|i| (0..qa.len()).map(|j| (0..qb.len()).map(|l| m[i][l] * m[j][l]).sum()).collect())
            .collect()
    } else {
        (0..qb.len())
            .map(|i| (0..qb.len()).map(|j| (0..qa.len()).map(|l| m[l][i] * m[l][j]).sum()).collect())
            .collect()
    };
    let (w, _) = sym_eig(&g);
    let mut c: Vec<f64> = w.into_iter().rev().take(k).map(|x| x.max(0.0).sqrt().min(1.0)).collect();
    c.sort_by(|x, y| y.total_cmp(x));
    c
}
