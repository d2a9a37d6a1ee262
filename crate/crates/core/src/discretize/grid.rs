use serde::Serialize;
use thiserror::Error;

use crate::potential::AxisBox;

/// Default upper bound on the number of grid cells.
pub const DEFAULT_CELL_CAP: usize = 300_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("box is degenerate or not 1- or 2-dimensional")]
    BadBox,
    #[error("grid would have {cells} cells, above the cap of {cap}")]
    TooManyCells { cells: usize, cap: usize },
}

/// Uniform cell-centred grid. Axis 0 varies fastest in the linear index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    #[serde(rename = "box")]
    pub bx: AxisBox,
    pub spacing: f64,
    pub dims: Vec<usize>,
    origin: Vec<f64>,
}

pub fn build_grid(bx: &AxisBox, dx: f64) -> Result<Grid, GridError> {
    build_grid_capped(bx, dx, DEFAULT_CELL_CAP)
}

pub fn build_grid_capped(bx: &AxisBox, dx: f64, cap: usize) -> Result<Grid, GridError> {
    if !(dx.is_finite() && dx > 0.0) {
        return Err(GridError::BadSpacing(dx));
    }
    if !bx.is_valid() || bx.dim() > 2 {
        return Err(GridError::BadBox);
    }
    let dims: Vec<usize> = bx
        .lower
        .iter()
        .zip(&bx.upper)
        .map(|(a, b)| ((b - a) / dx).round().max(1.0) as usize)
        .collect();
    let cells = dims
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .unwrap_or(usize::MAX);
    if cells > cap {
        return Err(GridError::TooManyCells { cells, cap });
    }
    let origin = bx
        .lower
        .iter()
        .zip(&bx.upper)
        .zip(&dims)
        .map(|((a, b), &n)| 0.5 * (a + b) - 0.5 * (n as f64 - 1.0) * dx)
        .collect();
    Ok(Grid {
        bx: bx.clone(),
        spacing: dx,
        dims,
        origin,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume `δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [i, 0]
        } else {
            [i % self.dims[0], i / self.dims[0]]
        }
    }

    pub fn linear_index(&self, m: [usize; 2]) -> usize {
        if self.dim() == 1 {
            m[0]
        } else {
            m[0] + self.dims[0] * m[1]
        }
    }

    /// Coordinate of axis `axis` for integer position `k`.
    pub fn axis_coord(&self, axis: usize, k: usize) -> f64 {
        self.origin[axis] + k as f64 * self.spacing
    }

    /// Centre of cell `i`; only the first `dim()` entries are meaningful.
    pub fn point(&self, i: usize) -> [f64; 2] {
        let m = self.multi_index(i);
        let mut p = [0.0; 2];
        for (a, pa) in p.iter_mut().enumerate().take(self.dim()) {
            *pa = self.axis_coord(a, m[a]);
        }
        p
    }

    pub fn point_vec(&self, i: usize) -> Vec<f64> {
        self.point(i)[..self.dim()].to_vec()
    }

    /// The cell whose centre is nearest to `x`, clamped into the grid.
    pub fn nearest_cell(&self, x: &[f64]) -> usize {
        let mut m = [0usize; 2];
        for a in 0..self.dim() {
            let k = ((x[a] - self.origin[a]) / self.spacing).round();
            m[a] = k.clamp(0.0, (self.dims[a] - 1) as f64) as usize;
        }
        self.linear_index(m)
    }

    /// The cell containing `x`, or `None` outside the gridded region.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut m = [0usize; 2];
        for a in 0..self.dim() {
            let k = ((x[a] - self.origin[a]) / self.spacing + 0.5).floor();
            if k < 0.0 || k >= self.dims[a] as f64 {
                return None;
            }
            m[a] = k as usize;
        }
        Some(self.linear_index(m))
    }

    pub fn on_boundary(&self, i: usize) -> bool {
        let m = self.multi_index(i);
        (0..self.dim()).any(|a| m[a] == 0 || m[a] + 1 == self.dims[a])
    }

    /// Axis neighbours (2 in 1D, up to 4 in 2D) appended to `out`.
    pub fn axis_neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let m = self.multi_index(i);
        for a in 0..self.dim() {
            if m[a] > 0 {
                let mut n = m;
                n[a] -= 1;
                out.push(self.linear_index(n));
            }
            if m[a] + 1 < self.dims[a] {
                let mut n = m;
                n[a] += 1;
                out.push(self.linear_index(n));
            }
        }
    }

    /// Integer offsets `o` with `|o|·δx < radius`, the origin included,
    /// ordered lexicographically by (axis 1, axis 0).
    pub fn ball_offsets(&self, radius: f64) -> Vec<[isize; 2]> {
        let r = (radius / self.spacing).ceil() as isize;
        let lim = radius / self.spacing;
        // Offsets exactly on the sphere are excluded despite rounding in h/δx.
        let lim2 = lim * lim * (1.0 - 1e-12);
        let mut out = Vec::new();
        if self.dim() == 1 {
            for o in -r..=r {
                if ((o * o) as f64) < lim2 {
                    out.push([o, 0]);
                }
            }
        } else {
            for oy in -r..=r {
                for ox in -r..=r {
                    if ((ox * ox + oy * oy) as f64) < lim2 {
                        out.push([ox, oy]);
                    }
                }
            }
        }
        out
    }

    /// `i + o` if it lies on the grid.
    #[inline]
    pub fn shift(&self, i: usize, o: [isize; 2]) -> Option<usize> {
        let m = self.multi_index(i);
        let mut n = [0usize; 2];
        for a in 0..self.dim() {
            let k = m[a] as isize + o[a];
            if k < 0 || k >= self.dims[a] as isize {
                return None;
            }
            n[a] = k as usize;
        }
        Some(self.linear_index(n))
    }

    /// Signed linear-index displacement of offset `o` (valid when `shift` succeeds).
    pub fn offset_stride(&self, o: [isize; 2]) -> isize {
        if self.dim() == 1 {
            o[0]
        } else {
            o[0] + self.dims[0] as isize * o[1]
        }
    }

    /// Samples `f` at every cell centre.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        use rayon::prelude::*;
        let d = self.dim();
        (0..self.len())
            .into_par_iter()
            .map(|i| f(&self.point(i)[..d]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_match_examples() {
        let g = build_grid(&AxisBox::symmetric(1, 2.0), 0.001).unwrap();
        assert_eq!(g.dims, vec![4000]);
        let g = build_grid(&AxisBox::symmetric(2, 2.0), 0.02).unwrap();
        assert_eq!(g.dims, vec![200, 200]);
        assert!(build_grid(&AxisBox::symmetric(1, 2.0), 0.0).is_err());
        assert!(build_grid(&AxisBox::symmetric(1, 2.0), -1.0).is_err());
        assert!(matches!(
            build_grid(&AxisBox::symmetric(2, 2.0), 0.001),
            Err(GridError::TooManyCells { .. })
        ));
    }

    #[test]
    fn index_round_trip() {
        let g = build_grid(&AxisBox::new(vec![-1.0, 0.0], vec![2.0, 1.0]), 0.1).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.linear_index(g.multi_index(i)), i);
            assert_eq!(g.cell_of(&g.point_vec(i)), Some(i));
            assert_eq!(g.nearest_cell(&g.point_vec(i)), i);
        }
        let p = g.point(0);
        assert!((p[0] + 0.95).abs() < 1e-12 && (p[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ball_offsets_are_symmetric() {
        let g = build_grid(&AxisBox::symmetric(2, 1.0), 0.1).unwrap();
        let offs = g.ball_offsets(0.35);
        assert!(offs.contains(&[0, 0]));
        for o in &offs {
            assert!(offs.contains(&[-o[0], -o[1]]));
        }
        assert!(!offs.contains(&[3, 2]));
        let g1 = build_grid(&AxisBox::symmetric(1, 1.0), 0.1).unwrap();
        assert_eq!(g1.ball_offsets(0.3).len(), 5);
    }
}
