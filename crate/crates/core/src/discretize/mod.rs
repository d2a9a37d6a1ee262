//! Finite-state analogues of the walk operator and of the Witten Laplacian.
//!
//! The walk chain on a grid is
//! `t_ij = w e^{-φ_j/h} 1_{|x_i−x_j|<h} / B_i`, `B_i = Σ_l w e^{-φ_l/h} 1_{|x_i−x_l|<h}`,
//! with `w = δx^d`. Writing `B_i = e^{-φ_i/h} b_i`, the symmetrized matrix is
//! `S_ij = w / sqrt(b_i b_j)` on the ball stencil, and `b_i` only involves
//! differences `φ_i − φ_l` over one ball, so nothing underflows. The operator
//! is applied matrix-free; [`GridOperator::to_csr`] materializes it.

pub mod csr;
pub mod grid;

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::par;
use crate::potential::PotentialSpec;
pub use csr::{read_mwop, write_mwop, CsrMatrix, MwopError};
pub use grid::{build_grid, build_grid_capped, Grid, GridError};

/// The ball must span at least this many cells per axis.
pub const MIN_CELLS_PER_BALL: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("h = {h} is below {min} δx = {min_h}; the ball is under-resolved")]
    BallTooSmall { h: f64, min: f64, min_h: f64 },
    #[error("operator kind {got:?} where {expected:?} was required")]
    KindMismatch {
        expected: OperatorKind,
        got: OperatorKind,
    },
    #[error("δx = {dx} exceeds sqrt(h)/10 = {limit}; the wells are under-resolved")]
    Resolution { dx: f64, limit: f64 },
    #[error("potential is {spec}-dimensional but the grid is {grid}-dimensional")]
    DimensionMismatch { spec: usize, grid: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OperatorKind {
    WalkT,
    WalkP,
    Witten0,
}

impl OperatorKind {
    pub fn label(self) -> &'static str {
        match self {
            OperatorKind::WalkT => "WALK_T",
            OperatorKind::WalkP => "WALK_P",
            OperatorKind::Witten0 => "WITTEN0",
        }
    }
}

#[derive(Debug, Clone)]
struct WalkStencil {
    offsets: Vec<[isize; 2]>,
    /// `(oy, half-width in x)` for every stencil row.
    rows: Vec<(isize, usize)>,
    /// `1/sqrt(b_i)`
    c: Vec<f64>,
    b: Vec<f64>,
    w: f64,
}

#[derive(Debug, Clone)]
struct WittenEdges {
    /// Per axis: `(α_i, β_i)` for the edge `(i, i+e_axis)`, `(0, 0)` where the
    /// forward neighbour is missing.
    coef: Vec<Vec<(f64, f64)>>,
    /// Per axis: `k·sqrt(v_i v_{i+e})`, zero where either end is below [`GROUND_FLOOR`].
    ground: Vec<Vec<f64>>,
    /// `v_i` where it is at least [`GROUND_FLOOR`], else zero.
    v: Vec<f64>,
    strides: Vec<usize>,
}

/// Edges whose ends both carry at least this much of the kernel vector are
/// applied in ground-state form `g_e (u_j/v_j − u_i/v_i)`, which vanishes
/// exactly on the kernel.
const GROUND_FLOOR: f64 = 1e-250;

#[derive(Debug, Clone)]
enum Repr {
    Walk(WalkStencil),
    Witten(WittenEdges),
}

/// A symmetric operator on grid functions together with its exact kernel
/// (or top) eigenvector.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub kind: OperatorKind,
    pub h: f64,
    pub grid: Grid,
    /// Unit-norm positive vector; `v_i ∝ sqrt(π_i)` for the walk, `∝ e^{-φ_i/h}`
    /// for the Witten operator.
    pub stationary_sqrt: Vec<f64>,
    /// `log` of the unnormalized `stationary_sqrt`.
    log_v: Vec<f64>,
    pub warnings: Vec<String>,
    repr: Repr,
}

fn check_dims(spec: &PotentialSpec, grid: &Grid) -> Result<(), DiscretizeError> {
    if spec.dimension() != grid.dim() {
        Err(DiscretizeError::DimensionMismatch {
            spec: spec.dimension(),
            grid: grid.dim(),
        })
    } else {
        Ok(())
    }
}

fn normalize_from_log(log_v: &[f64]) -> Vec<f64> {
    let m = log_v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<f64> = log_v.par_iter().map(|l| (l - m).exp()).collect();
    let n = par::norm(&v);
    par::scale(1.0 / n, &mut v);
    v
}

/// Assembles the symmetrized walk operator `S` (kind `WALK_T`).
pub fn assemble_walk(spec: &PotentialSpec, grid: &Grid, h: f64) -> Result<GridOperator, DiscretizeError> {
    check_dims(spec, grid)?;
    let min_h = MIN_CELLS_PER_BALL * grid.spacing;
    if h < min_h * (1.0 - 1e-12) {
        return Err(DiscretizeError::BallTooSmall {
            h,
            min: MIN_CELLS_PER_BALL,
            min_h,
        });
    }
    let n = grid.len();
    let phi = grid.sample(|x| spec.value(x));
    let phi_min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let s: Vec<f64> = phi.iter().map(|p| (p - phi_min) / h).collect();

    let offsets = grid.ball_offsets(h);
    let mut rows: Vec<(isize, usize)> = Vec::new();
    for o in &offsets {
        match rows.iter_mut().find(|r| r.0 == o[1]) {
            Some(r) => r.1 = r.1.max(o[0].unsigned_abs()),
            None => rows.push((o[1], o[0].unsigned_abs())),
        }
    }
    let w = grid.cell_volume();
    let (nx, ny) = (grid.dims[0], if grid.dim() == 2 { grid.dims[1] } else { 1 });

    let b: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i % nx, i / nx);
            let mut acc = 0.0;
            for &(oy, wx) in &rows {
                let jy = iy as isize + oy;
                if jy < 0 || jy >= ny as isize {
                    continue;
                }
                let lo = ix.saturating_sub(wx);
                let hi = (ix + wx).min(nx - 1);
                let base = jy as usize * nx;
                for j in (base + lo)..=(base + hi) {
                    acc += (s[i] - s[j]).exp();
                }
            }
            w * acc
        })
        .collect();
    let c: Vec<f64> = b.iter().map(|bi| 1.0 / bi.sqrt()).collect();
    let log_v: Vec<f64> = (0..n).map(|i| -s[i] + 0.5 * b[i].ln()).collect();
    let v = normalize_from_log(&log_v);

    let mut warnings = Vec::new();
    let d = grid.dim();
    let edge_mass: f64 = (0..n)
        .filter(|&i| grid.bx.interior_depth(&grid.point(i)[..d]) < h)
        .map(|i| v[i] * v[i])
        .sum();
    if edge_mass > 1e-12 {
        let msg = format!("stationary mass within h of the boundary is {edge_mass:.3e} (> 1e-12)");
        warn!("{msg}");
        warnings.push(msg);
    }

    Ok(GridOperator {
        kind: OperatorKind::WalkT,
        h,
        grid: grid.clone(),
        stationary_sqrt: v,
        log_v,
        warnings,
        repr: Repr::Walk(WalkStencil {
            offsets,
            rows,
            c,
            b,
            w,
        }),
    })
}

/// `P = I − S`, sharing the stencil of `op`.
#[allow(non_snake_case)]
pub fn to_P(op: &GridOperator) -> Result<GridOperator, DiscretizeError> {
    if op.kind != OperatorKind::WalkT {
        return Err(DiscretizeError::KindMismatch {
            expected: OperatorKind::WalkT,
            got: op.kind,
        });
    }
    let mut p = op.clone();
    p.kind = OperatorKind::WalkP;
    Ok(p)
}

/// Discrete Witten Laplacian on functions, `Σ_j L_jᵀ L_j` with the twisted
/// forward differences `(L_j u)_i = (h/δx)(u_{i+e_j} e^{Δ/2h} − u_i e^{-Δ/2h})`,
/// `Δ = φ_{i+e_j} − φ_i`. Its kernel is spanned by `e^{-φ/h}`.
pub fn assemble_witten(spec: &PotentialSpec, grid: &Grid, h: f64) -> Result<GridOperator, DiscretizeError> {
    check_dims(spec, grid)?;
    let limit = h.sqrt() / 10.0;
    if grid.spacing > limit {
        return Err(DiscretizeError::Resolution {
            dx: grid.spacing,
            limit,
        });
    }
    let n = grid.len();
    let phi = grid.sample(|x| spec.value(x));
    let phi_min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let k = h / grid.spacing;
    let mut coef = Vec::new();
    let mut strides = Vec::new();
    for axis in 0..grid.dim() {
        let mut o = [0isize; 2];
        o[axis] = 1;
        strides.push(grid.offset_stride(o) as usize);
        let ce: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| match grid.shift(i, o) {
                Some(j) => {
                    let half = (phi[j] - phi[i]) / (2.0 * h);
                    (k * half.exp(), k * (-half).exp())
                }
                None => (0.0, 0.0),
            })
            .collect();
        coef.push(ce);
    }
    let log_v: Vec<f64> = phi.iter().map(|p| -(p - phi_min) / h).collect();
    let v = normalize_from_log(&log_v);
    let vg: Vec<f64> = v.iter().map(|&x| if x >= GROUND_FLOOR { x } else { 0.0 }).collect();
    let ground = strides
        .iter()
        .zip(&coef)
        .map(|(&st, ce)| {
            (0..n)
                .into_par_iter()
                .map(|i| match ce[i] {
                    (0.0, 0.0) => 0.0,
                    _ if vg[i] > 0.0 && vg[i + st] > 0.0 => k * vg[i].sqrt() * vg[i + st].sqrt(),
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    Ok(GridOperator {
        kind: OperatorKind::Witten0,
        h,
        grid: grid.clone(),
        stationary_sqrt: v,
        log_v,
        warnings: Vec::new(),
        repr: Repr::Witten(WittenEdges {
            coef,
            ground,
            v: vg,
            strides,
        }),
    })
}

impl GridOperator {
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// Stencil size including the centre (walk operators only).
    pub fn stencil_len(&self) -> usize {
        match &self.repr {
            Repr::Walk(st) => st.offsets.len(),
            Repr::Witten(_) => 1 + 2 * self.grid.dim(),
        }
    }

    /// `b_i = e^{φ_i/h} B_i` of the walk chain.
    pub fn ball_weights(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Walk(st) => Some(&st.b),
            Repr::Witten(_) => None,
        }
    }

    fn walk_apply(&self, st: &WalkStencil, u: &[f64], y: &mut [f64], subtract: bool) {
        let g = &self.grid;
        let (nx, ny) = (g.dims[0], if g.dim() == 2 { g.dims[1] } else { 1 });
        let cu: Vec<f64> = u.par_iter().zip(&st.c).map(|(a, b)| a * b).collect();
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (ix, iy) = (i % nx, i / nx);
            let mut acc = 0.0;
            for &(oy, wx) in &st.rows {
                let jy = iy as isize + oy;
                if jy < 0 || jy >= ny as isize {
                    continue;
                }
                let lo = ix.saturating_sub(wx);
                let hi = (ix + wx).min(nx - 1);
                let base = jy as usize * nx;
                acc += cu[base + lo..=base + hi].iter().sum::<f64>();
            }
            let su = st.w * st.c[i] * acc;
            *yi = if subtract { u[i] - su } else { su };
        });
    }

    fn witten_apply(&self, we: &WittenEdges, u: &[f64], y: &mut [f64]) {
        let n = u.len();
        let w: Vec<f64> = u
            .par_iter()
            .zip(&we.v)
            .map(|(a, v)| if *v > 0.0 { a / v } else { 0.0 })
            .collect();
        let edge_vals: Vec<Vec<f64>> = we
            .coef
            .iter()
            .zip(&we.ground)
            .zip(&we.strides)
            .map(|((ce, gr), &st)| {
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let (a, b) = ce[i];
                        if gr[i] > 0.0 {
                            gr[i] * (w[i + st] - w[i])
                        } else if a == 0.0 && b == 0.0 {
                            0.0
                        } else {
                            a * u[i + st] - b * u[i]
                        }
                    })
                    .collect()
            })
            .collect();
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            let mut ground = 0.0;
            for (((ce, gr), &st), g) in we.coef.iter().zip(&we.ground).zip(&we.strides).zip(&edge_vals) {
                if gr[i] > 0.0 {
                    ground -= gr[i] * g[i];
                } else {
                    acc -= ce[i].1 * g[i];
                }
                if i >= st {
                    if gr[i - st] > 0.0 {
                        ground += gr[i - st] * g[i - st];
                    } else {
                        acc += ce[i - st].0 * g[i - st];
                    }
                }
            }
            *yi = if ground != 0.0 { acc + ground / we.v[i] } else { acc };
        });
    }

    /// `y ← A u` for the operator represented by `self.kind`.
    pub fn matvec(&self, u: &[f64], y: &mut [f64]) {
        assert_eq!(u.len(), self.n());
        assert_eq!(y.len(), self.n());
        match (&self.repr, self.kind) {
            (Repr::Walk(st), OperatorKind::WalkT) => self.walk_apply(st, u, y, false),
            (Repr::Walk(st), _) => self.walk_apply(st, u, y, true),
            (Repr::Witten(we), _) => self.witten_apply(we, u, y),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        self.matvec(u, &mut y);
        y
    }

    /// Matrix of the quadratic form of the positive semidefinite operator
    /// (`I − S` for walk kinds, `P^W` for the Witten kind) on `xs`, computed
    /// as a sum of nonnegative edge terms that vanish on the kernel vector.
    pub fn dirichlet_gram(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = xs.len();
        let n = self.n();
        let flat = match &self.repr {
            Repr::Walk(st) => {
                let g = &self.grid;
                let pos: Vec<[isize; 2]> = st
                    .offsets
                    .iter()
                    .copied()
                    .filter(|&o| g.offset_stride(o) > 0)
                    .collect();
                par::sum_vec(n, k * k, |i, acc| {
                    let mut di = vec![0.0; k];
                    for &o in &pos {
                        let Some(j) = g.shift(i, o) else { continue };
                        let sij = st.w * (st.c[i] * st.c[j]);
                        let r = (0.5 * (self.log_v[j] - self.log_v[i])).exp();
                        for (a, x) in xs.iter().enumerate() {
                            di[a] = x[i] * r - x[j] / r;
                        }
                        for a in 0..k {
                            let t = sij * di[a];
                            for b in 0..k {
                                acc[a * k + b] += t * di[b];
                            }
                        }
                    }
                })
            }
            Repr::Witten(we) => par::sum_vec(n, k * k, |i, acc| {
                let mut di = vec![0.0; k];
                for (ce, &st) in we.coef.iter().zip(&we.strides) {
                    let (al, be) = ce[i];
                    if al == 0.0 && be == 0.0 {
                        continue;
                    }
                    for (a, x) in xs.iter().enumerate() {
                        di[a] = al * x[i + st] - be * x[i];
                    }
                    for a in 0..k {
                        for b in 0..k {
                            acc[a * k + b] += di[a] * di[b];
                        }
                    }
                }
            }),
        };
        let mut m = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                m[a][b] = 0.5 * (flat[a * k + b] + flat[b * k + a]);
            }
        }
        m
    }

    /// Row sums of the stochastic matrix `t_ij = S_ij v_j / v_i`.
    pub fn transition_row_sums(&self) -> Option<Vec<f64>> {
        let Repr::Walk(st) = &self.repr else { return None };
        let g = &self.grid;
        Some(
            (0..self.n())
                .into_par_iter()
                .map(|i| {
                    let mut acc = 0.0;
                    for &o in &st.offsets {
                        if let Some(j) = g.shift(i, o) {
                            let t = st.w * (self.log_v[j] - self.log_v[i]).exp() / (st.b[i] * st.b[j]).sqrt();
                            acc += t;
                        }
                    }
                    acc
                })
                .collect(),
        )
    }

    /// Materializes the operator as CSR with columns sorted in each row.
    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.n();
        let g = &self.grid;
        let rows: Vec<Vec<(usize, f64)>> = match &self.repr {
            Repr::Walk(st) => (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut r: Vec<(usize, f64)> = st
                        .offsets
                        .iter()
                        .filter_map(|&o| g.shift(i, o))
                        .map(|j| {
                            let sij = st.w * (st.c[i] * st.c[j]);
                            match self.kind {
                                OperatorKind::WalkT => (j, sij),
                                _ if i == j => (j, 1.0 - sij),
                                _ => (j, -sij),
                            }
                        })
                        .collect();
                    r.sort_by_key(|e| e.0);
                    r
                })
                .collect(),
            Repr::Witten(we) => (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut diag = 0.0;
                    let mut r = Vec::new();
                    for (ce, &st) in we.coef.iter().zip(&we.strides) {
                        let (a, b) = ce[i];
                        diag += b * b;
                        if a != 0.0 || b != 0.0 {
                            r.push((i + st, -a * b));
                        }
                        if i >= st {
                            let (a2, b2) = ce[i - st];
                            if a2 != 0.0 || b2 != 0.0 {
                                diag += a2 * a2;
                                r.push((i - st, -a2 * b2));
                            }
                        }
                    }
                    r.push((i, diag));
                    r.sort_by_key(|e| e.0);
                    r
                })
                .collect(),
        };
        CsrMatrix::from_rows(n, rows)
    }
}
