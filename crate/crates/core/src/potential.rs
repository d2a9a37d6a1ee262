//! Morse potentials with exact first and second derivatives.
//!
//! Two families are supported: a small set of named builtins used by the
//! benchmark configurations, and sparse polynomials given as a list of
//! monomials. Both are evaluated analytically; no finite differences are
//! used outside of tests.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::LandscapeLabeling;

/// Default tolerance below which a Hessian eigenvalue counts as degenerate.
pub const MORSE_TOLERANCE: f64 = 1e-8;
/// Default minimum separation between distinct Arrhenius numbers.
pub const GENERIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("point has dimension {got}, potential has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),
    #[error("unknown builtin potential `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{name}` is {expected}-dimensional, config says {got}")]
    BuiltinDimension {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("builtin `{name}` takes at most {max} parameters, got {got}")]
    TooManyParams { name: String, max: usize, got: usize },
    #[error("monomial exponent vector has length {got}, expected {expected}")]
    MonomialArity { expected: usize, got: usize },
    #[error("polynomial potential has no monomials")]
    EmptyPolynomial,
    #[error("non-finite parameter or coefficient")]
    NonFinite,
    #[error("`{0}` form requires the `{1}` field")]
    MissingField(&'static str, &'static str),
    #[error("unknown potential form `{0}` (expected \"builtin\" or \"polynomial\")")]
    UnknownForm(String),
}

/// Axis-aligned box `[lower_i, upper_i]` in one or two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    /// The cube `[-half, half]^dim`.
    pub fn symmetric(dim: usize, half: f64) -> Self {
        Self {
            lower: vec![-half; dim],
            upper: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_valid(&self) -> bool {
        !self.lower.is_empty()
            && self.lower.len() == self.upper.len()
            && self
                .lower
                .iter()
                .zip(&self.upper)
                .all(|(a, b)| a.is_finite() && b.is_finite() && a < b)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Distance from `x` to the complement of the box (0 outside).
    pub fn interior_depth(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }
}

/// Symmetric `d × d` Hessian for `d ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub dim: usize,
    pub m: [[f64; 2]; 2],
}

impl Hessian {
    pub fn scalar(v: f64) -> Self {
        Self {
            dim: 1,
            m: [[v, 0.0], [0.0, 0.0]],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            _ => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.m[0][0]],
            _ => {
                let (a, b, c) = (self.m[0][0], self.m[0][1], self.m[1][1]);
                let mean = 0.5 * (a + c);
                let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                // Product form for the smaller-magnitude root avoids cancellation.
                let big = if mean >= 0.0 { mean + r } else { mean - r };
                let small = if big != 0.0 { (a * c - b * b) / big } else { 0.0 };
                let mut e = vec![big, small];
                e.sort_by(|x, y| x.partial_cmp(y).unwrap());
                e
            }
        }
    }

    /// Unit eigenvector for the smallest eigenvalue.
    pub fn lowest_eigenvector(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![1.0],
            _ => {
                let lam = self.eigenvalues()[0];
                let (a, b, c) = (self.m[0][0], self.m[0][1], self.m[1][1]);
                let (u, v) = if (a - lam).abs() + b.abs() >= (c - lam).abs() + b.abs() {
                    (-b, a - lam)
                } else {
                    (c - lam, -b)
                };
                let n = (u * u + v * v).sqrt();
                if n == 0.0 {
                    vec![1.0, 0.0]
                } else {
                    vec![u / n, v / n]
                }
            }
        }
    }

    /// Operator (spectral) norm.
    pub fn norm(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.dim == 1 || self.m[0][1] == self.m[1][0]
    }
}

/// Parameters of the 2D three-well landscape: a quartic confinement minus
/// three Gaussian wells placed on a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeWell {
    pub depths: [f64; 3],
    pub width: f64,
    pub confinement: f64,
    pub radius: f64,
}

impl Default for ThreeWell {
    fn default() -> Self {
        Self {
            depths: [3.2, 2.6, 2.0],
            width: 0.9,
            confinement: 0.025,
            radius: 2.0,
        }
    }
}

impl ThreeWell {
    fn centers(&self) -> [[f64; 2]; 3] {
        let mut c = [[0.0; 2]; 3];
        for (k, ck) in c.iter_mut().enumerate() {
            let theta = 0.5 * PI + 2.0 * PI * k as f64 / 3.0;
            *ck = [self.radius * theta.cos(), self.radius * theta.sin()];
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `(x² − 1)² + tilt·x`
    DoubleWellTilted { tilt: f64 },
    /// `(x² − 1)²`
    SymmetricDoubleWell,
    ThreeWell(ThreeWell),
}

impl Builtin {
    pub const NAMES: [&'static str; 3] =
        ["double_well_tilted", "symmetric_double_well", "three_well"];

    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, PotentialError> {
        let check = |max: usize| {
            if params.len() > max {
                Err(PotentialError::TooManyParams {
                    name: name.to_string(),
                    max,
                    got: params.len(),
                })
            } else {
                Ok(())
            }
        };
        match name {
            "double_well_tilted" => {
                check(1)?;
                Ok(Builtin::DoubleWellTilted {
                    tilt: params.first().copied().unwrap_or(0.3),
                })
            }
            "symmetric_double_well" => {
                check(0)?;
                Ok(Builtin::SymmetricDoubleWell)
            }
            "three_well" => {
                check(6)?;
                let mut tw = ThreeWell::default();
                let slots: [&mut f64; 6] = {
                    let ThreeWell {
                        depths: [a, b, c],
                        width,
                        confinement,
                        radius,
                    } = &mut tw;
                    [a, b, c, width, confinement, radius]
                };
                for (slot, p) in slots.into_iter().zip(params) {
                    *slot = *p;
                }
                Ok(Builtin::ThreeWell(tw))
            }
            other => Err(PotentialError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::DoubleWellTilted { .. } => "double_well_tilted",
            Builtin::SymmetricDoubleWell => "symmetric_double_well",
            Builtin::ThreeWell(_) => "three_well",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Builtin::ThreeWell(_) => 2,
            _ => 1,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Builtin::DoubleWellTilted { tilt } => vec![*tilt],
            Builtin::SymmetricDoubleWell => vec![],
            Builtin::ThreeWell(t) => vec![
                t.depths[0],
                t.depths[1],
                t.depths[2],
                t.width,
                t.confinement,
                t.radius,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialForm {
    Builtin(Builtin),
    Polynomial(Vec<Monomial>),
}

/// A Morse potential on ℝ^d, `d ∈ {1, 2}`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    dimension: usize,
    form: PotentialForm,
}

/// The `[potential]` block of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialDef {
    pub dimension: usize,
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monomials: Option<Vec<Monomial>>,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl TryFrom<PotentialDef> for PotentialSpec {
    type Error = PotentialError;

    fn try_from(def: PotentialDef) -> Result<Self, Self::Error> {
        if def.params.iter().any(|p| !p.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        match def.form.as_str() {
            "builtin" => {
                let name = def
                    .name
                    .ok_or(PotentialError::MissingField("builtin", "name"))?;
                let b = Builtin::from_name(&name, &def.params)?;
                if b.dimension() != def.dimension {
                    return Err(PotentialError::BuiltinDimension {
                        name,
                        expected: b.dimension(),
                        got: def.dimension,
                    });
                }
                PotentialSpec::builtin(b)
            }
            "polynomial" => {
                let m = def
                    .monomials
                    .ok_or(PotentialError::MissingField("polynomial", "monomials"))?;
                PotentialSpec::polynomial(def.dimension, m)
            }
            other => Err(PotentialError::UnknownForm(other.to_string())),
        }
    }
}

impl From<&PotentialSpec> for PotentialDef {
    fn from(spec: &PotentialSpec) -> Self {
        match &spec.form {
            PotentialForm::Builtin(b) => PotentialDef {
                dimension: spec.dimension,
                form: "builtin".into(),
                name: Some(b.name().into()),
                monomials: None,
                params: b.params(),
            },
            PotentialForm::Polynomial(m) => PotentialDef {
                dimension: spec.dimension,
                form: "polynomial".into(),
                name: None,
                monomials: Some(m.clone()),
                params: vec![],
            },
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            PotentialForm::Builtin(b) => write!(f, "{}{:?}", b.name(), b.params()),
            PotentialForm::Polynomial(m) => write!(f, "polynomial({} terms, d={})", m.len(), self.dimension),
        }
    }
}

impl PotentialSpec {
    pub fn builtin(b: Builtin) -> Result<Self, PotentialError> {
        if b.params().iter().any(|p| !p.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        Ok(Self {
            dimension: b.dimension(),
            form: PotentialForm::Builtin(b),
        })
    }

    pub fn double_well_tilted(tilt: f64) -> Self {
        Self::builtin(Builtin::DoubleWellTilted { tilt }).expect("finite tilt")
    }

    pub fn three_well() -> Self {
        Self::builtin(Builtin::ThreeWell(ThreeWell::default())).expect("finite defaults")
    }

    pub fn polynomial(dimension: usize, monomials: Vec<Monomial>) -> Result<Self, PotentialError> {
        if !(1..=2).contains(&dimension) {
            return Err(PotentialError::UnsupportedDimension(dimension));
        }
        if monomials.is_empty() {
            return Err(PotentialError::EmptyPolynomial);
        }
        for m in &monomials {
            if m.exponents.len() != dimension {
                return Err(PotentialError::MonomialArity {
                    expected: dimension,
                    got: m.exponents.len(),
                });
            }
            if !m.coefficient.is_finite() {
                return Err(PotentialError::NonFinite);
            }
        }
        Ok(Self {
            dimension,
            form: PotentialForm::Polynomial(monomials),
        })
    }

    /// Convenience constructor for one-dimensional polynomials from
    /// `(exponent, coefficient)` pairs.
    pub fn poly1(terms: &[(u32, f64)]) -> Self {
        let m = terms
            .iter()
            .map(|&(e, c)| Monomial {
                exponents: vec![e],
                coefficient: c,
            })
            .collect();
        Self::polynomial(1, m).expect("valid 1D polynomial")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn form(&self) -> &PotentialForm {
        &self.form
    }

    fn check(&self, x: &[f64]) -> Result<(), PotentialError> {
        if x.len() != self.dimension {
            Err(PotentialError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, PotentialError> {
        self.check(x)?;
        Ok(self.value(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, PotentialError> {
        self.check(x)?;
        Ok(self.gradient(x)[..self.dimension].to_vec())
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Hessian, PotentialError> {
        self.check(x)?;
        Ok(self.hess(x))
    }

    /// φ(x) without the dimension check. `x` must have `dimension()` entries.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.form {
            PotentialForm::Builtin(b) => match b {
                Builtin::DoubleWellTilted { tilt } => {
                    let s = x[0] * x[0] - 1.0;
                    s * s + tilt * x[0]
                }
                Builtin::SymmetricDoubleWell => {
                    let s = x[0] * x[0] - 1.0;
                    s * s
                }
                Builtin::ThreeWell(t) => {
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    let mut v = t.confinement * r2 * r2;
                    let s2 = 2.0 * t.width * t.width;
                    for (a, c) in t.depths.iter().zip(t.centers()) {
                        let q = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                        v -= a * (-q / s2).exp();
                    }
                    v
                }
            },
            PotentialForm::Polynomial(ms) => ms
                .iter()
                .map(|m| {
                    m.coefficient
                        * m.exponents
                            .iter()
                            .zip(x)
                            .map(|(&e, &xi)| xi.powi(e as i32))
                            .product::<f64>()
                })
                .sum(),
        }
    }

    /// ∇φ(x) as a fixed array; only the first `dimension()` entries are used.
    pub fn gradient(&self, x: &[f64]) -> [f64; 2] {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.form {
            PotentialForm::Builtin(b) => match b {
                Builtin::DoubleWellTilted { tilt } => {
                    [4.0 * x[0] * (x[0] * x[0] - 1.0) + tilt, 0.0]
                }
                Builtin::SymmetricDoubleWell => [4.0 * x[0] * (x[0] * x[0] - 1.0), 0.0],
                Builtin::ThreeWell(t) => {
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    let mut g = [4.0 * t.confinement * r2 * x[0], 4.0 * t.confinement * r2 * x[1]];
                    let w2 = t.width * t.width;
                    for (a, c) in t.depths.iter().zip(t.centers()) {
                        let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
                        let e = a * (-(dx * dx + dy * dy) / (2.0 * w2)).exp();
                        g[0] += e * dx / w2;
                        g[1] += e * dy / w2;
                    }
                    g
                }
            },
            PotentialForm::Polynomial(ms) => {
                let mut g = [0.0; 2];
                for m in ms {
                    for (i, gi) in g.iter_mut().enumerate().take(self.dimension) {
                        let ei = m.exponents[i];
                        if ei == 0 {
                            continue;
                        }
                        let mut t = m.coefficient * ei as f64 * x[i].powi(ei as i32 - 1);
                        for (j, &ej) in m.exponents.iter().enumerate() {
                            if j != i {
                                t *= x[j].powi(ej as i32);
                            }
                        }
                        *gi += t;
                    }
                }
                g
            }
        }
    }

    pub fn grad_norm(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x);
        (g[0] * g[0] + g[1] * g[1]).sqrt()
    }

    pub fn hess(&self, x: &[f64]) -> Hessian {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.form {
            PotentialForm::Builtin(b) => match b {
                Builtin::DoubleWellTilted { .. } | Builtin::SymmetricDoubleWell => {
                    Hessian::scalar(12.0 * x[0] * x[0] - 4.0)
                }
                Builtin::ThreeWell(t) => {
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    let k = 4.0 * t.confinement;
                    let mut h = [
                        [k * (r2 + 2.0 * x[0] * x[0]), k * 2.0 * x[0] * x[1]],
                        [k * 2.0 * x[0] * x[1], k * (r2 + 2.0 * x[1] * x[1])],
                    ];
                    let w2 = t.width * t.width;
                    for (a, c) in t.depths.iter().zip(t.centers()) {
                        let d = [x[0] - c[0], x[1] - c[1]];
                        let e = a * (-(d[0] * d[0] + d[1] * d[1]) / (2.0 * w2)).exp();
                        for (i, row) in h.iter_mut().enumerate() {
                            for (j, hij) in row.iter_mut().enumerate() {
                                let delta = if i == j { 1.0 / w2 } else { 0.0 };
                                *hij += e * (delta - d[i] * d[j] / (w2 * w2));
                            }
                        }
                    }
                    // Exact symmetry regardless of summation order above.
                    h[1][0] = h[0][1];
                    Hessian { dim: 2, m: h }
                }
            },
            PotentialForm::Polynomial(ms) => {
                let d = self.dimension;
                let mut h = [[0.0; 2]; 2];
                for m in ms {
                    for i in 0..d {
                        for j in i..d {
                            let mut e = m.exponents.clone();
                            let mut c = m.coefficient;
                            c *= e[i] as f64;
                            if e[i] == 0 {
                                continue;
                            }
                            e[i] -= 1;
                            c *= e[j] as f64;
                            if e[j] == 0 {
                                continue;
                            }
                            e[j] -= 1;
                            let t = c * e
                                .iter()
                                .zip(x)
                                .map(|(&k, &xi)| xi.powi(k as i32))
                                .product::<f64>();
                            h[i][j] += t;
                        }
                    }
                }
                if d == 2 {
                    h[1][0] = h[0][1];
                }
                Hessian { dim: d, m: h }
            }
        }
    }

    /// Laplacian Δφ(x).
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.hess(x).trace()
    }
}

/// Outcome of the standing-hypothesis checks on a computational box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub morse_ok: bool,
    pub min_hessian_spectral_gap: f64,
    pub boundary_gradient_min: f64,
    pub generic_ok: bool,
    pub min_s_separation: f64,
    /// `min_{∂box} φ − min_{box} φ`; the Gibbs weight at the boundary is
    /// `exp(-boundary_margin / h)` relative to its maximum.
    pub boundary_margin: f64,
}

impl HypothesisReport {
    pub fn all_ok(&self) -> bool {
        self.morse_ok && self.generic_ok && self.boundary_gradient_min > 0.0
    }

    /// Relative Gibbs weight `e^{-φ/h}` at the box boundary.
    pub fn boundary_mass_ratio(&self, h: f64) -> f64 {
        (-self.boundary_margin / h).exp()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HypothesisTolerances {
    pub morse: f64,
    pub generic: f64,
}

impl Default for HypothesisTolerances {
    fn default() -> Self {
        Self {
            morse: MORSE_TOLERANCE,
            generic: GENERIC_TOLERANCE,
        }
    }
}

/// Samples `per_face` points on each face of the box (the whole face grid in
/// 2D has `per_face` points per edge).
fn boundary_samples(bx: &AxisBox, per_face: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    match bx.dim() {
        1 => {
            out.push(vec![bx.lower[0]]);
            out.push(vec![bx.upper[0]]);
        }
        _ => {
            for k in 0..per_face {
                let t = k as f64 / (per_face - 1) as f64;
                let x = bx.lower[0] + t * (bx.upper[0] - bx.lower[0]);
                let y = bx.lower[1] + t * (bx.upper[1] - bx.lower[1]);
                out.push(vec![x, bx.lower[1]]);
                out.push(vec![x, bx.upper[1]]);
                out.push(vec![bx.lower[0], y]);
                out.push(vec![bx.upper[0], y]);
            }
        }
    }
    out
}

/// Evaluates the Morse, growth and genericity hypotheses of `spec` on `bx`,
/// using the critical points and pairs recorded in `labeling`.
pub fn check_hypotheses(
    spec: &PotentialSpec,
    bx: &AxisBox,
    labeling: &LandscapeLabeling,
    tol: HypothesisTolerances,
) -> HypothesisReport {
    let min_gap = labeling
        .critical_points
        .iter()
        .flat_map(|c| c.hessian_eigs.iter().map(|e| e.abs()))
        .fold(f64::INFINITY, f64::min);

    let per_face = 100 * spec.dimension();
    let samples = boundary_samples(bx, per_face);
    let mut gmin = f64::INFINITY;
    let mut bmin = f64::INFINITY;
    for p in &samples {
        gmin = gmin.min(spec.grad_norm(p));
        bmin = bmin.min(spec.value(p));
    }
    // The shell just inside the boundary is sampled as well.
    let inset = 1e-3 * bx.diameter();
    for p in &samples {
        let q: Vec<f64> = p
            .iter()
            .zip(bx.lower.iter().zip(&bx.upper))
            .map(|(v, (a, b))| v.clamp(a + inset, b - inset))
            .collect();
        gmin = gmin.min(spec.grad_norm(&q));
    }
    let global_min = labeling
        .minima
        .iter()
        .map(|c| c.value)
        .fold(f64::INFINITY, f64::min);

    let finite_s: Vec<f64> = labeling
        .pairs
        .iter()
        .filter_map(|p| p.arrhenius.finite())
        .collect();
    let mut sep = f64::INFINITY;
    for i in 0..finite_s.len() {
        for j in (i + 1)..finite_s.len() {
            sep = sep.min((finite_s[i] - finite_s[j]).abs());
        }
    }

    HypothesisReport {
        morse_ok: min_gap > tol.morse,
        min_hessian_spectral_gap: min_gap,
        boundary_gradient_min: gmin,
        generic_ok: sep > tol.generic,
        min_s_separation: sep,
        boundary_margin: bmin - global_min,
    }
}
