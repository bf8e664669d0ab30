use alloc::vec;
use alloc::vec::Vec;

use super::{IncrementLaw, WalkConfig};
use crate::math::{exp, lgamma, log, pow, sqrt};

/// Exact law of the first return time `H_0` for the listed walks.
///
/// `u_m = P(S_m = 0)` is built by splitting `m` steps binomially over the axes,
/// first returns follow from the renewal relation
/// `u_m = sum_{k=1}^m f_k u_{m-k}`, and the escape probability from the
/// partial Green sum plus its `m^{-d/2}` tail.
#[derive(Debug, Clone)]
pub struct ReturnLaw {
    config: WalkConfig,
    occupation: Vec<f64>,
    first: Vec<f64>,
    cdf: Vec<f64>,
    return_prob: f64,
}

/// Binomial(m, p) probabilities on `k` within ~12 standard deviations of the mean.
fn binomial_window(m: usize, p: f64, mut visit: impl FnMut(usize, f64)) {
    if m == 0 {
        visit(0, 1.0);
        return;
    }
    let q = 1.0 - p;
    let mf = m as f64;
    let sd = sqrt(mf * p * q);
    let lo = ((mf * p - 12.0 * sd - 2.0).max(0.0)) as usize;
    let hi = ((mf * p + 12.0 * sd + 2.0) as usize).min(m);
    let mode = (((mf + 1.0) * p) as usize).clamp(lo, hi);
    let ln_mode = lgamma(mf + 1.0) - lgamma(mode as f64 + 1.0) - lgamma((m - mode) as f64 + 1.0)
        + mode as f64 * log(p)
        + (m - mode) as f64 * log(q);
    let at_mode = exp(ln_mode);
    visit(mode, at_mode);
    let ratio = p / q;
    let mut pmf = at_mode;
    for k in mode..hi {
        pmf *= (m - k) as f64 / (k + 1) as f64 * ratio;
        visit(k + 1, pmf);
    }
    pmf = at_mode;
    for k in (lo + 1..=mode).rev() {
        pmf *= k as f64 / (m - k + 1) as f64 / ratio;
        visit(k - 1, pmf);
    }
}

fn simple_occupation(dim: usize, horizon: usize) -> Vec<f64> {
    let mut u1 = vec![0.0; horizon + 1];
    u1[0] = 1.0;
    let mut k = 0;
    while k + 2 <= horizon {
        u1[k + 2] = u1[k] * (k + 1) as f64 / (k + 2) as f64;
        k += 2;
    }
    let mut acc = u1.clone();
    for e in 2..=dim {
        let p = 1.0 / e as f64;
        let mut next = vec![0.0; horizon + 1];
        for (m, slot) in next.iter_mut().enumerate().step_by(2) {
            let mut s = 0.0;
            binomial_window(m, p, |k, w| {
                if k % 2 == 0 {
                    s += w * u1[k] * acc[m - k];
                }
            });
            *slot = s;
        }
        acc = next;
    }
    acc
}

impl ReturnLaw {
    /// Tabulates the law up to `horizon` steps.
    pub fn new(config: WalkConfig, horizon: usize) -> Self {
        let horizon = horizon.max(2);
        let d = config.dim();
        let simple = simple_occupation(d, horizon);
        let occupation = match config.law() {
            IncrementLaw::Simple => simple,
            IncrementLaw::LazySimple => {
                let mut lazy = vec![0.0; horizon + 1];
                for (m, slot) in lazy.iter_mut().enumerate() {
                    let mut s = 0.0;
                    binomial_window(m, 0.5, |j, w| s += w * simple[j]);
                    *slot = s;
                }
                lazy
            }
        };

        let mut first = vec![0.0; horizon + 1];
        for m in 1..=horizon {
            let mut s = occupation[m];
            for k in 1..m {
                s -= first[k] * occupation[m - k];
            }
            first[m] = s.max(0.0);
        }
        let mut cdf = vec![0.0; horizon + 1];
        for m in 1..=horizon {
            cdf[m] = cdf[m - 1] + first[m];
        }

        let return_prob = if d <= 2 {
            1.0
        } else {
            let partial: f64 = occupation.iter().sum();
            let dh = d as f64 / 2.0;
            let mf = horizon as f64;
            // tail of sum_m u_m beyond the horizon, matched to the last term
            let tail = match config.law() {
                IncrementLaw::Simple => {
                    let last = if horizon % 2 == 0 { horizon } else { horizon - 1 };
                    let asym = |m: f64| 2.0 * pow(d as f64 / (2.0 * core::f64::consts::PI * m), dh);
                    let scale = occupation[last] / asym(last as f64);
                    let start = last as f64 + 1.0;
                    scale * pow(d as f64 / (2.0 * core::f64::consts::PI), dh) * pow(start, 1.0 - dh) / (dh - 1.0)
                }
                IncrementLaw::LazySimple => {
                    let asym = |m: f64| pow(d as f64 / (core::f64::consts::PI * m), dh);
                    let scale = occupation[horizon] / asym(mf);
                    scale * pow(d as f64 / core::f64::consts::PI, dh) * pow(mf + 0.5, 1.0 - dh) / (dh - 1.0)
                }
            };
            1.0 - 1.0 / (partial + tail)
        };

        ReturnLaw {
            config,
            occupation,
            first,
            cdf,
            return_prob,
        }
    }

    pub fn config(&self) -> WalkConfig {
        self.config
    }

    pub fn horizon(&self) -> usize {
        self.occupation.len() - 1
    }

    /// `P(S_m = 0)`.
    pub fn occupation(&self, m: usize) -> f64 {
        self.occupation[m]
    }

    /// `P(H_0 = m)`.
    pub fn first_return(&self, m: usize) -> f64 {
        self.first[m]
    }

    /// `P(H_0 <= m)`; `m` is clamped to the horizon.
    pub fn return_by(&self, m: usize) -> f64 {
        self.cdf[m.min(self.horizon())]
    }

    /// `P(H_0 < infinity)`, equal to 1 for recurrent walks.
    pub fn return_prob(&self) -> f64 {
        self.return_prob
    }

    /// `kappa_0 = -log P(H_0 < infinity)`.
    pub fn kappa0(&self) -> f64 {
        -log(self.return_prob)
    }

    /// `G(0, 0) = 1 / (1 - P(H_0 < infinity))`.
    pub fn green_at_origin(&self) -> f64 {
        1.0 / (1.0 - self.return_prob)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_first_returns() {
        // P(H_0 = 2m) = C(2m, m) / ((2m - 1) 4^m)
        let law = ReturnLaw::new(WalkConfig::simple(1).unwrap(), 40);
        assert!((law.first_return(2) - 0.5).abs() < 1e-15);
        assert!((law.first_return(4) - 0.125).abs() < 1e-15);
        assert!((law.first_return(6) - 0.0625).abs() < 1e-15);
        assert_eq!(law.first_return(3), 0.0);
        assert_eq!(law.return_prob(), 1.0);
    }

    #[test]
    fn two_dimensional_occupation() {
        // u_{2m} = (C(2m, m) / 4^m)^2 in d = 2
        let law = ReturnLaw::new(WalkConfig::simple(2).unwrap(), 20);
        let c = 252.0 / 1024.0;
        assert!((law.occupation(10) - c * c).abs() < 1e-14);
    }

    #[test]
    fn lazy_walk_doubles_green_function() {
        let a = ReturnLaw::new(WalkConfig::simple(3).unwrap(), 3000);
        let b = ReturnLaw::new(WalkConfig::new(3, IncrementLaw::LazySimple).unwrap(), 3000);
        // every simple-walk visit is held a Geometric(1/2) number of times
        assert!((2.0 * a.green_at_origin() - b.green_at_origin()).abs() < 2e-4);
        assert!((b.first_return(1) - 0.5).abs() < 1e-15);
    }
}
