//! Gauss–Legendre rules and adaptive Gauss–Kronrod integration.

use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    NotConverged { tol: f64, estimate: f64 },
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + r * x, r * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl64() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(64))
}

pub fn gl48() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(48))
}

/// Polar product rule on the unit disk: `(x, y, weight)` triples with
/// `n_r` radial and `n_theta` angular Gauss–Legendre nodes.
pub fn disk_rule(radial: &GaussLegendre, angular: &GaussLegendre) -> Vec<(f64, f64, f64)> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(radial.len() * angular.len());
    for (rho, wr) in radial.mapped(0.0, 1.0) {
        for (theta, wt) in angular.mapped(0.0, two_pi) {
            out.push((rho * theta.cos(), rho * theta.sin(), wr * wt * rho));
        }
    }
    out
}

pub fn disk48() -> &'static [(f64, f64, f64)] {
    static R: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    R.get_or_init(|| disk_rule(gl48(), gl48()))
}

pub fn disk64() -> &'static [(f64, f64, f64)] {
    static R: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    R.get_or_init(|| disk_rule(gl64(), gl64()))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite(c));
    }
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x1 = c - r * XGK[j];
        let x2 = c + r * XGK[j];
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite(x2));
        }
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((k * r, ((k - g) * r).abs()))
}

/// Globally adaptive Gauss–Kronrod (7/15) on `[a, b]`.
///
/// Returns `(integral, error_estimate)`. Stops when the summed error estimate
/// is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64), QuadratureError> {
    let mut segs = vec![(a, b, gk15(&mut f, a, b)?)];
    for _ in 0..2000 {
        let total: f64 = segs.iter().map(|s| s.2 .0).sum();
        let err: f64 = segs.iter().map(|s| s.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        segs.push((lo, mid, gk15(&mut f, lo, mid)?));
        segs.push((mid, hi, gk15(&mut f, mid, hi)?));
    }
    let total: f64 = segs.iter().map(|s| s.2 .0).sum();
    let err: f64 = segs.iter().map(|s| s.2 .1).sum();
    if err <= 10.0 * abs_tol.max(rel_tol * total.abs()) {
        Ok((total, err))
    } else {
        Err(QuadratureError::NotConverged {
            tol: abs_tol,
            estimate: err,
        })
    }
}

/// Adaptive integral over the unit disk in polar coordinates.
pub fn integrate_disk_adaptive(
    f: impl Fn(f64, f64) -> f64,
    tol: f64,
) -> Result<f64, QuadratureError> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut inner_err = None;
    let outer = integrate_adaptive(
        |rho| {
            if rho == 0.0 {
                return 0.0;
            }
            match integrate_adaptive(
                |t| f(rho * t.cos(), rho * t.sin()),
                0.0,
                two_pi,
                0.1 * tol,
                0.1 * tol,
            ) {
                Ok((v, _)) => rho * v,
                Err(e) => {
                    inner_err = Some(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        tol,
        tol,
    )?;
    match inner_err {
        Some(e) => Err(e),
        None => Ok(outer.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1, 2, 5, 48, 64] {
            let r = GaussLegendre::new(n);
            let sw: f64 = r.weights.iter().sum();
            assert_relative_eq!(sw, 2.0, epsilon = 1e-13);
            let deg = 2 * n - 1;
            let val = r.integrate(-1.0, 1.0, |x| x.powi(deg as i32 - 1));
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert_relative_eq!(val, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_oscillation_and_peaks() {
        let (v, _) = integrate_adaptive(|x| (50.0 * x).cos(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        assert_relative_eq!(v, 50f64.sin() / 50.0, epsilon = 1e-12);
        let (v, _) = integrate_adaptive(|x| (-x * x / 1e-4).exp(), -1.0, 1.0, 1e-14, 1e-12).unwrap();
        assert_relative_eq!(v, (std::f64::consts::PI * 1e-4).sqrt(), max_relative = 1e-11);
    }

    #[test]
    fn disk_rules_integrate_moments() {
        let area: f64 = disk48().iter().map(|p| p.2).sum();
        assert_relative_eq!(area, std::f64::consts::PI, epsilon = 1e-13);
        let xx: f64 = disk64().iter().map(|p| p.0 * p.0 * p.2).sum();
        assert_relative_eq!(xx, std::f64::consts::PI / 4.0, epsilon = 1e-13);
        let a = integrate_disk_adaptive(|x, y| x * x + y * y, 1e-11).unwrap();
        assert_relative_eq!(a, std::f64::consts::PI / 2.0, epsilon = 1e-10);
    }
}
