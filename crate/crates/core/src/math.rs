//! Scalar special functions, exact summation and small fitting helpers.
//!
//! Everything goes through `libm` so results are identical on every target.

use alloc::vec::Vec;

pub use libm::{ceil, erfc, exp, expm1, floor, lgamma, log, log1p, pow, round, sqrt, tgamma};

pub const LN_2: f64 = core::f64::consts::LN_2;

/// `log(sum(exp(v)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| exp(v - max)).sum();
    max + log(sum)
}

/// Natural log of the regularized upper incomplete gamma function `Q(s, x)`.
pub fn ln_gamma_q(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let prefix = -x + s * log(x) - lgamma(s);
    if x < s + 1.0 {
        // series for P(s, x), then Q = 1 - P
        let mut term = 1.0 / s;
        let mut sum = term;
        for k in 1..10_000 {
            term *= x / (s + k as f64);
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = exp(prefix) * sum;
        log1p(-p)
    } else {
        // modified Lentz continued fraction for Q(s, x)
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        prefix + log(h)
    }
}

/// Exactly rounded floating-point summation (Shewchuk partials).
///
/// Two accumulators holding the same multiset of addends always round to the
/// same value, no matter how the addends were grouped or merged.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                core::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // round-half-even correction when the tail sits exactly on a tie
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = ExactSum::new();
    acc.extend(values);
    acc.value()
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_norm: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Some(LinearFit {
        slope,
        intercept,
        residual_norm: sqrt(rss),
    })
}

/// Mean and standard error of the mean of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, sqrt(var / n as f64))
}

/// SplitMix64 output function; used to derive independent stream keys.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_gamma_matches_exponential_tail() {
        // Q(1, x) = e^{-x}
        for &x in &[0.1, 0.5, 1.0, 3.0, 20.0, 300.0] {
            assert!((ln_gamma_q(1.0, x) + x).abs() < 1e-12 * (1.0 + x), "x = {x}");
        }
    }

    #[test]
    fn upper_gamma_half_is_erfc() {
        // Q(1/2, x) = erfc(sqrt(x))
        for &x in &[0.01, 0.3, 1.0, 2.0, 8.0] {
            let want = log(erfc(sqrt(x)));
            assert!((ln_gamma_q(0.5, x) - want).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn exact_sum_is_correctly_rounded() {
        let v = [1e100, 1.0, -1e100, 1e-30, 3.0];
        assert_eq!(exact_sum(v), 4.0);
        let mut a = ExactSum::new();
        a.extend([0.1, 0.2]);
        let mut b = ExactSum::new();
        b.extend([0.3, -0.6]);
        a.merge(&b);
        assert_eq!(a.value(), exact_sum([0.1, 0.2, 0.3, -0.6]));
    }

    #[test]
    fn log_sum_exp_handles_empty_and_infinite() {
        assert_eq!(log_sum_exp(core::iter::empty::<f64>()), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp([log(2.0), log(3.0)]);
        assert!((v - log(5.0)).abs() < 1e-15);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: alloc::vec::Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-15);
        assert!((fit.intercept - 2.0).abs() < 1e-15);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
