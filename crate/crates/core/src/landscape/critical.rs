use log::debug;
use serde::Serialize;

use super::LandscapeError;
use crate::discretize::grid::build_grid_capped;
use crate::potential::{AxisBox, PotentialSpec, MORSE_TOLERANCE};

/// A non-degenerate critical point of φ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    pub index: usize,
    pub hessian_eigs: Vec<f64>,
    pub hessian_det: f64,
}

impl CriticalPoint {
    pub fn classify(spec: &PotentialSpec, x: &[f64]) -> Self {
        let h = spec.hess(x);
        let eigs = h.eigenvalues();
        Self {
            location: x.to_vec(),
            value: spec.value(x),
            index: eigs.iter().filter(|e| **e < 0.0).count(),
            hessian_det: h.det(),
            hessian_eigs: eigs,
        }
    }

    pub fn distance_to(&self, x: &[f64]) -> f64 {
        self.location
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// The negative Hessian eigenvalue of an index-1 point, as a positive number.
    pub fn unstable_curvature(&self) -> Option<f64> {
        (self.index == 1).then(|| -self.hessian_eigs[0])
    }
}

/// Newton iteration from `x0`; `None` if it leaves the box or stalls.
fn newton(spec: &PotentialSpec, bx: &AxisBox, x0: &[f64], tol: f64, max_step: f64) -> Option<Vec<f64>> {
    let d = spec.dimension();
    let mut x = x0.to_vec();
    for _ in 0..200 {
        let g = spec.gradient(&x);
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let h = spec.hess(&x);
        let mut step = match d {
            1 => {
                if h.get(0, 0) == 0.0 {
                    return None;
                }
                vec![g[0] / h.get(0, 0)]
            }
            _ => {
                let det = h.det();
                if det == 0.0 {
                    return None;
                }
                vec![
                    (h.get(1, 1) * g[0] - h.get(0, 1) * g[1]) / det,
                    (h.get(0, 0) * g[1] - h.get(1, 0) * g[0]) / det,
                ]
            }
        };
        let len = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        if len > max_step {
            step.iter_mut().for_each(|s| *s *= max_step / len);
        }
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi -= si;
        }
        if !bx.contains(&x) || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if gn <= tol && len <= 1e-10 * max_step {
            return Some(x);
        }
    }
    (spec.grad_norm(&x) <= tol).then_some(x)
}

/// Locates all critical points inside `bx` by Newton refinement of the
/// local minima of `|∇φ|` on a coarse grid.
pub fn find_critical_points(
    spec: &PotentialSpec,
    bx: &AxisBox,
    coarse_spacing: f64,
    newton_tolerance: f64,
) -> Result<Vec<CriticalPoint>, LandscapeError> {
    find_critical_points_with(spec, bx, coarse_spacing, newton_tolerance, MORSE_TOLERANCE)
}

pub fn find_critical_points_with(
    spec: &PotentialSpec,
    bx: &AxisBox,
    coarse_spacing: f64,
    newton_tolerance: f64,
    morse_tolerance: f64,
) -> Result<Vec<CriticalPoint>, LandscapeError> {
    if spec.dimension() != bx.dim() {
        return Err(LandscapeError::DimensionMismatch);
    }
    let grid = build_grid_capped(bx, coarse_spacing, 4_000_000)?;
    let gnorm = grid.sample(|x| spec.grad_norm(x));
    let d = grid.dim();
    let mut seeds = Vec::new();
    for i in 0..grid.len() {
        let mut is_min = true;
        let neigh: &[[isize; 2]] = if d == 1 {
            &[[-1, 0], [1, 0]]
        } else {
            &[[-1, -1], [0, -1], [1, -1], [-1, 0], [1, 0], [-1, 1], [0, 1], [1, 1]]
        };
        for o in neigh {
            if let Some(j) = grid.shift(i, *o) {
                if gnorm[j] < gnorm[i] || (gnorm[j] == gnorm[i] && j < i) {
                    is_min = false;
                    break;
                }
            }
        }
        if is_min {
            seeds.push(i);
        }
    }

    let mut found: Vec<CriticalPoint> = Vec::new();
    let dedup = 10.0 * newton_tolerance.max(1e-10);
    for &i in &seeds {
        let x0 = grid.point_vec(i);
        match newton(spec, bx, &x0, newton_tolerance, 2.0 * coarse_spacing) {
            Some(x) => {
                if found.iter().any(|c| c.distance_to(&x) <= dedup) {
                    continue;
                }
                let cp = CriticalPoint::classify(spec, &x);
                if cp.hessian_eigs.iter().any(|e| e.abs() <= morse_tolerance) {
                    return Err(LandscapeError::NonMorseCritical {
                        location: x,
                        eigenvalue: cp
                            .hessian_eigs
                            .iter()
                            .copied()
                            .fold(f64::INFINITY, |a, e| if e.abs() < a.abs() { e } else { a }),
                    });
                }
                found.push(cp);
            }
            None => debug!("Newton seed at {x0:?} did not converge; skipped"),
        }
    }
    found.sort_by(|a, b| {
        a.index
            .cmp(&b.index)
            .then(a.value.total_cmp(&b.value))
            .then_with(|| a.location.partial_cmp(&b.location).unwrap())
    });
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilted_double_well_has_three_points() {
        let spec = PotentialSpec::double_well_tilted(0.3);
        let cps = find_critical_points(&spec, &AxisBox::symmetric(1, 2.0), 0.01, 1e-12).unwrap();
        assert_eq!(cps.len(), 3);
        assert_eq!(cps.iter().filter(|c| c.index == 0).count(), 2);
        assert_eq!(cps.iter().filter(|c| c.index == 1).count(), 1);
        for c in &cps {
            let x = c.location[0];
            assert!((4.0 * x * (x * x - 1.0) + 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_single_point() {
        let spec = PotentialSpec::poly1(&[(2, 1.0)]);
        let cps = find_critical_points(&spec, &AxisBox::symmetric(1, 1.0), 0.05, 1e-12).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].index, 0);
        assert!(cps[0].location[0].abs() < 1e-12);
        assert_eq!(cps[0].hessian_det, 2.0);
    }

    #[test]
    fn degenerate_point_is_rejected() {
        let spec = PotentialSpec::poly1(&[(4, 1.0)]);
        let r = find_critical_points(&spec, &AxisBox::symmetric(1, 1.0), 0.05, 1e-12);
        assert!(r.is_err() || r.unwrap().is_empty());
    }
}
