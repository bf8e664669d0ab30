//! Reference values computed independently of the library code paths.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[a, b]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
    }
    out
}

/// `u = (1/pi^3) int_{[0,pi]^3} dk / (1 - (cos k1 + cos k2 + cos k3)/3)`, the
/// expected number of visits to the origin of the simple walk on `Z^3`.
///
/// Spherical coordinates around the singular corner; the cube splits into six
/// congruent pieces where one coordinate is largest, so each radial integral
/// runs to a face `r = pi / cos(theta)` and the integrand times `r^2` is smooth.
pub fn lattice_green_3d() -> f64 {
    let m = 48;
    let mut total = 0.0;
    for &(phi, wphi) in &gauss_legendre(m, 0.0, PI / 4.0) {
        let theta_max = (1.0 / phi.cos()).atan();
        for &(theta, wt) in &gauss_legendre(m, 0.0, theta_max) {
            let (st, ct) = theta.sin_cos();
            let dir = [st * phi.cos(), st * phi.sin(), ct];
            for &(r, wr) in &gauss_legendre(m, 0.0, PI / ct) {
                // 1 - cos x = 2 sin^2(x/2) keeps r^2 / (1 - mean cos) accurate near 0
                let one_minus = dir.iter().map(|u| 2.0 * (r * u / 2.0).sin().powi(2)).sum::<f64>() / 3.0;
                let f = if r == 0.0 { 6.0 } else { r * r / one_minus };
                total += wphi * wt * wr * f * st;
            }
        }
    }
    6.0 * total / PI.powi(3)
}

/// `P_0(H_0 < infinity) = 1 - 1/u` for the simple walk on `Z^3`.
pub fn return_probability_3d() -> f64 {
    1.0 - 1.0 / lattice_green_3d()
}

/// Upper tail of the standard normal.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * rwrs_core::math::erfc(x / std::f64::consts::SQRT_2)
}
