//! Bessel function of the first kind, order one.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `J₁(x)` to roughly 1e-14 absolute accuracy.
///
/// Power series below 8, Hankel's expansion above 25, and in between the
/// Bessel integral `(1/π)∫₀^π cos(θ − x sin θ) dθ` by the trapezoidal rule,
/// which converges geometrically for this periodic integrand.
pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        series(ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        trapezoid(ax)
    } else {
        hankel(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + 1.0));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            return sum;
        }
    }
}

fn trapezoid(x: f64) -> f64 {
    // The integrand has bandwidth about x; 2x + 40 panels is ample.
    let n = (2.0 * x) as usize + 40;
    let h = PI / n as f64;
    let f = |t: f64| (t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s * h / PI
}

fn hankel(x: f64) -> f64 {
    let mu = 4.0;
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut k = 1;
    // Alternate Q and P terms: a_k = Π (μ − (2j−1)²) / (k! (8x)^k).
    loop {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * z);
        if term.abs() < 1e-17 {
            break;
        }
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        k += 1;
        if k > 60 {
            break;
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolics::quadrature::integrate_adaptive;

    fn oracle(x: f64) -> f64 {
        integrate_adaptive(|t| (t - x * t.sin()).cos(), 0.0, PI, 1e-15, 1e-14)
            .unwrap()
            .0
            / PI
    }

    #[test]
    fn reference_values() {
        // Tabulated J1 values.
        assert!((j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j1(5.0) - -0.327_579_137_591_465_2).abs() < 1e-14);
        assert!((j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert_eq!(j1(0.0), 0.0);
    }

    #[test]
    fn matches_integral_across_switch_points() {
        for i in 0..400 {
            let x = 0.1 + i as f64 * 0.15;
            let e = (j1(x) - oracle(x)).abs();
            assert!(e < 1e-12, "x={x}: err {e:e}");
        }
        assert!((j1(-3.0) + j1(3.0)).abs() == 0.0);
    }
}
