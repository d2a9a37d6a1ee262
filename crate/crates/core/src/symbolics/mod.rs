//! Scalar symbol data of the ball-averaging operator.
//!
//! `G(ξ) = (1/α_d)∫_{|z|<1} e^{iz·ξ} dz` is the Fourier multiplier of the
//! normalized ball average and `Γ(τ) = G(iτ)` its analytic continuation to
//! the imaginary axis. The remaining functions are the leading terms of the
//! conjugating weight `a_h` and of the principal and subprincipal symbols of
//! `P_h = 1 − T_h`.

pub mod bessel;
pub mod quadrature;

use std::f64::consts::PI;

use thiserror::Error;

use crate::potential::PotentialSpec;
use quadrature::{disk48, disk64, gl64, integrate_adaptive, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("unsupported dimension {0}")]
    Dimension(usize),
    #[error("semiclassical parameter h = {0} must lie in (0, 1]")]
    BadH(f64),
    #[error("a_h exponent {0:.3e} overflows; h is too small for the local Lipschitz constant")]
    QuadratureOverflow(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolParams {
    pub dimension: usize,
    pub h: f64,
    pub alpha_d: f64,
    pub beta_d: f64,
}

impl SymbolParams {
    pub fn new(dimension: usize, h: f64) -> Result<Self, SymbolError> {
        let alpha_d = match dimension {
            1 => 2.0,
            2 => PI,
            d => return Err(SymbolError::Dimension(d)),
        };
        if !(h > 0.0 && h <= 1.0) {
            return Err(SymbolError::BadH(h));
        }
        Ok(Self {
            dimension,
            h,
            alpha_d,
            beta_d: 1.0 / (2.0 * dimension as f64 + 4.0),
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Radial profile of `G` in dimension `d`.
pub fn g_radial(d: usize, r: f64) -> f64 {
    match d {
        1 => {
            if r < 1e-4 {
                let r2 = r * r;
                1.0 - r2 / 6.0 + r2 * r2 / 120.0
            } else {
                r.sin() / r
            }
        }
        _ => {
            if r < 1e-4 {
                let r2 = r * r;
                1.0 - r2 / 8.0 + r2 * r2 / 192.0
            } else {
                2.0 * bessel::j1(r) / r
            }
        }
    }
}

/// Radial profile of `Γ` in dimension `d`.
pub fn gamma_radial(d: usize, r: f64) -> f64 {
    match d {
        1 => {
            if r < 1e-4 {
                let r2 = r * r;
                1.0 + r2 / 6.0 + r2 * r2 / 120.0
            } else {
                r.sinh() / r
            }
        }
        _ => {
            // Γ is radial, so integrate e^{-r z₁} over the disk.
            disk64()
                .iter()
                .map(|&(x, _, w)| w * (-r * x).exp())
                .sum::<f64>()
                / PI
        }
    }
}

/// The multiplier `G(ξ)`.
pub fn g(params: &SymbolParams, xi: &[f64]) -> f64 {
    g_radial(params.dimension, norm(xi))
}

/// `Γ(τ) = G(iτ) ≥ 1`.
pub fn gamma(params: &SymbolParams, tau: &[f64]) -> f64 {
    gamma_radial(params.dimension, norm(tau))
}

/// `G(ξ + iτ)` as `(re, im)` by direct quadrature of the defining integral.
pub fn g_complex(params: &SymbolParams, xi: &[f64], tau: &[f64]) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    match params.dimension {
        1 => {
            for (z, w) in gl64().mapped(-1.0, 1.0) {
                let m = (-z * tau[0]).exp();
                re += w * m * (z * xi[0]).cos();
                im += w * m * (z * xi[0]).sin();
            }
        }
        _ => {
            for &(x, y, w) in disk64() {
                let m = (-(x * tau[0] + y * tau[1])).exp();
                let ph = x * xi[0] + y * xi[1];
                re += w * m * ph.cos();
                im += w * m * ph.sin();
            }
        }
    }
    (re / params.alpha_d, im / params.alpha_d)
}

/// `a_h^{-2}(x) = (1/(α_d h^d)) ∫_{|z|<h} e^{(φ(x)−φ(x+z))/h} dz`, returned
/// as its logarithm. Exponents are shifted by their maximum before summing.
pub fn log_a_h_inv_sq(spec: &PotentialSpec, params: &SymbolParams, x: &[f64]) -> f64 {
    let h = params.h;
    let phi_x = spec.value(x);
    let mut exps = Vec::new();
    let mut ws = Vec::new();
    match params.dimension {
        1 => {
            for (u, w) in gl64().mapped(-1.0, 1.0) {
                exps.push((phi_x - spec.value(&[x[0] + h * u])) / h);
                ws.push(w);
            }
        }
        _ => {
            for &(u, v, w) in disk48() {
                exps.push((phi_x - spec.value(&[x[0] + h * u, x[1] + h * v])) / h);
                ws.push(w);
            }
        }
    }
    let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = exps.iter().zip(&ws).map(|(e, w)| w * (e - m).exp()).sum();
    m + (s / params.alpha_d).ln()
}

/// The conjugating weight `a_h(x)`.
pub fn a_h(spec: &PotentialSpec, params: &SymbolParams, x: &[f64]) -> Result<f64, SymbolError> {
    let l = log_a_h_inv_sq(spec, params, x);
    if (0.5 * l).abs() > 700.0 {
        return Err(SymbolError::QuadratureOverflow(0.5 * l));
    }
    Ok((-0.5 * l).exp())
}

/// `∫_{|z|<1} e^{-g·z} ⟨H z, z⟩ dz`.
fn weighted_quadratic_moment(spec: &PotentialSpec, x: &[f64]) -> f64 {
    let gr = spec.gradient(x);
    let h = spec.hess(x);
    match spec.dimension() {
        1 => gl64()
            .mapped(-1.0, 1.0)
            .map(|(z, w)| w * (-gr[0] * z).exp() * h.get(0, 0) * z * z)
            .sum(),
        _ => disk48()
            .iter()
            .map(|&(u, v, w)| {
                let q = h.get(0, 0) * u * u + 2.0 * h.get(0, 1) * u * v + h.get(1, 1) * v * v;
                w * (-(gr[0] * u + gr[1] * v)).exp() * q
            })
            .sum(),
    }
}

pub fn a0(spec: &PotentialSpec, params: &SymbolParams, x: &[f64]) -> f64 {
    let gr = spec.gradient(x);
    gamma(params, &gr[..params.dimension]).powf(-0.5)
}

pub fn a1(spec: &PotentialSpec, params: &SymbolParams, x: &[f64]) -> f64 {
    let gr = spec.gradient(x);
    let gm = gamma(params, &gr[..params.dimension]);
    gm.powf(-1.5) * weighted_quadratic_moment(spec, x) / (4.0 * params.alpha_d)
}

/// Subprincipal coefficient `G₁(x)`; equals `−β_d Δφ` at critical points.
pub fn g1(spec: &PotentialSpec, params: &SymbolParams, x: &[f64]) -> f64 {
    let gr = spec.gradient(x);
    let gm = gamma(params, &gr[..params.dimension]);
    -weighted_quadratic_moment(spec, x) / (2.0 * params.alpha_d * gm * gm)
}

/// Principal symbol `p₀(x, ξ) = 1 − G(ξ)/Γ(∇φ(x))`.
pub fn p0(spec: &PotentialSpec, params: &SymbolParams, x: &[f64], xi: &[f64]) -> f64 {
    let gr = spec.gradient(x);
    1.0 - g(params, xi) / gamma(params, &gr[..params.dimension])
}

pub fn p1(spec: &PotentialSpec, params: &SymbolParams, x: &[f64], xi: &[f64]) -> f64 {
    g1(spec, params, x) * g(params, xi)
}

/// Adaptive-quadrature evaluation of `G` from its defining integral.
///
/// In 2D the integral reduces to `(2/π)∫₀^π cos(r cos θ) sin²θ dθ`.
pub fn g_reference(d: usize, r: f64, tol: f64) -> Result<f64, QuadratureError> {
    match d {
        1 => Ok(integrate_adaptive(|z| (r * z).cos(), -1.0, 1.0, tol, tol)?.0 / 2.0),
        _ => Ok(integrate_adaptive(
            |t| (r * t.cos()).cos() * t.sin().powi(2),
            0.0,
            PI,
            tol,
            tol,
        )?
        .0 * 2.0
            / PI),
    }
}

/// Adaptive-quadrature evaluation of `Γ` from its defining integral.
pub fn gamma_reference(d: usize, r: f64, tol: f64) -> Result<f64, QuadratureError> {
    match d {
        1 => Ok(integrate_adaptive(|z| (-r * z).exp(), -1.0, 1.0, tol, tol)?.0 / 2.0),
        _ => Ok(integrate_adaptive(
            |t| (-r * t.cos()).exp() * t.sin().powi(2),
            0.0,
            PI,
            tol,
            tol,
        )?
        .0 * 2.0
            / PI),
    }
}

/// Adaptive reference for `a_h^{-2}(x)` (1D only; 2D uses nested rules).
pub fn a_h_inv_sq_reference(
    spec: &PotentialSpec,
    params: &SymbolParams,
    x: &[f64],
    tol: f64,
) -> Result<f64, QuadratureError> {
    let h = params.h;
    let phi_x = spec.value(x);
    match params.dimension {
        1 => Ok(integrate_adaptive(
            |u| ((phi_x - spec.value(&[x[0] + h * u])) / h).exp(),
            -1.0,
            1.0,
            0.0,
            tol,
        )?
        .0 / 2.0),
        _ => {
            let v = quadrature::integrate_disk_adaptive(
                |u, v| ((phi_x - spec.value(&[x[0] + h * u, x[1] + h * v])) / h).exp(),
                tol,
            )?;
            Ok(v / PI)
        }
    }
}

/// One row of the closed-form versus quadrature self-check.
#[derive(Debug, Clone)]
pub struct SelfCheckRow {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SelfCheckRow {
    fn new(name: &str, max_error: f64, tolerance: f64, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            max_error,
            tolerance,
            passed,
        }
    }
}

/// Closed forms against adaptive quadrature and the structural properties
/// of the multiplier. Deterministic: arguments come from a fixed-seed stream.
pub fn selfcheck(samples: usize, seed: u64) -> Vec<SelfCheckRow> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    for d in [1usize, 2] {
        let mut eg: f64 = 0.0;
        let mut egam: f64 = 0.0;
        for _ in 0..samples {
            let r = rng.random_range(0.0..40.0);
            let t = rng.random_range(0.0..12.0);
            let gr = g_reference(d, r, 1e-13).unwrap_or(f64::NAN);
            let tr = gamma_reference(d, t, 1e-13).unwrap_or(f64::NAN);
            eg = eg.max((g_radial(d, r) - gr).abs());
            egam = egam.max((gamma_radial(d, t) - tr).abs() / tr);
        }
        rows.push(SelfCheckRow::new(&format!("G closed form, d={d}"), eg, 1e-9, eg <= 1e-9));
        rows.push(SelfCheckRow::new(&format!("Gamma closed form, d={d}"), egam, 1e-9, egam <= 1e-9));

        let beta = 1.0 / (2.0 * d as f64 + 4.0);
        let r = 1e-2;
        let e = ((1.0 - g_radial(d, r)) / (r * r) - beta).abs();
        rows.push(SelfCheckRow::new(&format!("beta_d limit, d={d}"), e, 1e-6, e < 1e-6));

        let params = SymbolParams::new(d, 0.1).expect("valid");
        let spec = if d == 1 {
            PotentialSpec::double_well_tilted(0.3)
        } else {
            PotentialSpec::three_well()
        };
        let mut worst: f64 = 0.0;
        for _ in 0..(100 * samples) {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-30.0..30.0)).collect();
            worst = worst.min(p0(&spec, &params, &x, &xi));
        }
        rows.push(SelfCheckRow::new(&format!("p0 >= 0, d={d}"), -worst, 0.0, worst >= 0.0));

        let mut excess: f64 = f64::NEG_INFINITY;
        for _ in 0..(10 * samples) {
            let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-20.0..20.0)).collect();
            let tau: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (re, im) = g_complex(&params, &xi, &tau);
            let lhs = (re * re + im * im).sqrt();
            let rhs = g_complex(&params, &[0.0; 2][..d], &tau).0;
            excess = excess.max(lhs - rhs * (1.0 + 1e-13));
        }
        rows.push(SelfCheckRow::new(
            &format!("|G(xi+i tau)| <= G(i tau), d={d}"),
            excess.max(0.0),
            0.0,
            excess <= 0.0,
        ));
    }
    rows
}
