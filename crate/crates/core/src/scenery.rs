//! Symmetric exponential-power scenery, `f(t) = exp(-c |t|^alpha) / Z`.

use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rand_xoshiro::SplitMix64;
use rustc_hash::FxBuildHasher;

use crate::error::{invalid, Error, Result};
use crate::math::{exp, expm1, lgamma, ln_gamma_q, log, log1p, mix64, pow, sqrt};
use crate::quad::integrate_pieces;
use crate::rng::{self, tag};
use crate::walk::Site;

const QUAD_REL_TOL: f64 = 1e-12;
/// Integrands are cut where they fall this many e-folds below their peak.
const CUTOFF: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct SceneryDistribution {
    alpha: f64,
    c: f64,
    ln_z: f64,
    gamma: Gamma<f64>,
}

impl PartialEq for SceneryDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.c == other.c
    }
}

/// Location of the maximum of a concave `h` and points on either side where it
/// has dropped by `CUTOFF`.
fn concave_window(h: &impl Fn(f64) -> f64, mode: f64) -> (f64, f64) {
    let top = h(mode);
    let mut step = 1e-3_f64.max(mode.abs() * 1e-3);
    while h(mode + step) - top > -CUTOFF {
        step *= 2.0;
    }
    let right = mode + step;
    step = 1e-3_f64.max(mode.abs() * 1e-3);
    while h(mode - step) - top > -CUTOFF {
        step *= 2.0;
    }
    (mode - step, right)
}

fn sorted_breaks(mut pts: Vec<f64>) -> Vec<f64> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

impl SceneryDistribution {
    pub fn new(alpha: f64, c: f64) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(invalid(alloc::format!("alpha must be finite and >= 1, got {alpha}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(alloc::format!("c_alpha must be positive, got {c}")));
        }
        let ln_z = log(2.0) + lgamma(1.0 + 1.0 / alpha) - log(c) / alpha;
        let gamma = Gamma::new(1.0 / alpha, 1.0).map_err(|_| invalid("bad gamma shape"))?;
        Ok(SceneryDistribution { alpha, c, ln_z, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Speed exponent `a = alpha / (alpha + 1)`.
    pub fn a(&self) -> f64 {
        self.alpha / (self.alpha + 1.0)
    }

    /// `b = 1 / (alpha + 1)`.
    pub fn b(&self) -> f64 {
        1.0 / (self.alpha + 1.0)
    }

    /// Dual exponent with `1/alpha + 1/dual = 1`; infinite at `alpha = 1`.
    pub fn dual(&self) -> f64 {
        if self.alpha == 1.0 {
            f64::INFINITY
        } else {
            self.alpha / (self.alpha - 1.0)
        }
    }

    pub fn log_density(&self, t: f64) -> f64 {
        -self.c * pow(t.abs(), self.alpha) - self.ln_z
    }

    pub fn density(&self, t: f64) -> f64 {
        exp(self.log_density(t))
    }

    /// `E[eta^2] = Gamma(3/alpha) / (c^{2/alpha} Gamma(1/alpha))`.
    pub fn variance(&self) -> f64 {
        exp(lgamma(3.0 / self.alpha) - lgamma(1.0 / self.alpha) - 2.0 * log(self.c) / self.alpha)
    }

    /// Exact `log P(eta > t)` for `t > 0`, via the regularized incomplete gamma.
    pub fn log_tail(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid(alloc::format!("log_tail needs t > 0, got {t}")));
        }
        Ok(self.log_tail_unchecked(t))
    }

    pub(crate) fn log_tail_unchecked(&self, t: f64) -> f64 {
        -crate::math::LN_2 + ln_gamma_q(1.0 / self.alpha, self.c * pow(t, self.alpha))
    }

    /// `P(eta > t)` for any real `t`.
    pub fn tail(&self, t: f64) -> f64 {
        if t > 0.0 {
            exp(self.log_tail_unchecked(t))
        } else if t < 0.0 {
            1.0 - exp(self.log_tail_unchecked(-t))
        } else {
            0.5
        }
    }

    /// One draw: `|eta| = (G / c)^{1/alpha}` with `G ~ Gamma(1/alpha, 1)` and a
    /// fair sign. The `alpha = 1` and `alpha = 2` laws use their direct samplers.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.alpha == 2.0 {
            let z: f64 = StandardNormal.sample(rng);
            return z / sqrt(2.0 * self.c);
        }
        let magnitude = if self.alpha == 1.0 {
            let e: f64 = Exp1.sample(rng);
            e / self.c
        } else {
            pow(self.gamma.sample(rng) / self.c, 1.0 / self.alpha)
        };
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }

    /// `count` seeded i.i.d. draws.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, tag::SAMPLE, 0);
        (0..count).map(|_| self.draw(&mut r)).collect()
    }

    /// `int f` by quadrature; equals 1 up to quadrature error.
    pub fn normalization(&self) -> Result<f64> {
        let h = |t: f64| -self.c * pow(t.abs(), self.alpha);
        let (lo, hi) = concave_window(&h, 0.0);
        let r = integrate_pieces(|t| exp(h(t)), &[lo, 0.0, hi], QUAD_REL_TOL, 0.0)?;
        Ok(r.value * exp(-self.ln_z))
    }

    fn check_mgf_domain(&self, lambda: f64) -> Result<()> {
        if self.alpha == 1.0 && lambda.abs() >= self.c {
            return Err(Error::MgfDiverges {
                lambda: lambda.abs(),
                c_alpha: self.c,
            });
        }
        if !lambda.is_finite() {
            return Err(invalid("lambda must be finite"));
        }
        Ok(())
    }

    /// Peak of `theta t - c |t|^alpha` over `t`.
    fn tilted_mode(&self, theta: f64) -> f64 {
        if self.alpha == 1.0 || theta == 0.0 {
            return 0.0;
        }
        let m = pow(theta.abs() / (self.c * self.alpha), 1.0 / (self.alpha - 1.0));
        if theta > 0.0 {
            m
        } else {
            -m
        }
    }

    /// `(Lambda(theta), Lambda'(theta))` by adaptive quadrature in log-scaled form.
    fn mgf_by_quadrature(&self, theta: f64) -> Result<(f64, f64)> {
        self.check_mgf_domain(theta)?;
        if theta == 0.0 {
            // the law is symmetric and normalized
            return Ok((0.0, 0.0));
        }
        // Lambda is even and Lambda' odd, so work with theta > 0
        let sign = if theta < 0.0 { -1.0 } else { 1.0 };
        let theta = theta.abs();
        let (alpha, c) = (self.alpha, self.c);
        let mode = self.tilted_mode(theta);
        let top = theta * mode - c * pow(mode, alpha);
        let scale = c * pow(mode, alpha);
        // h(mode + s) - h(mode), free of cancellation against a large peak:
        // with theta = c alpha m^{alpha-1} and u = s/m it is c m^alpha (alpha u - ((1+u)^alpha - 1))
        let h = |s: f64| {
            let t = mode + s;
            if mode > 0.0 && t >= 0.0 {
                let u = s / mode;
                scale * (alpha * u - expm1(alpha * log1p(u)))
            } else {
                theta * t - c * pow(t.abs(), alpha) - top
            }
        };
        let (lo, hi) = concave_window(&h, 0.0);
        let breaks = sorted_breaks(alloc::vec![lo, hi, 0.0, (-mode).clamp(lo, hi)]);
        let mass = integrate_pieces(|s| exp(h(s)), &breaks, QUAD_REL_TOL, 0.0)?;
        let first = integrate_pieces(|s| s * exp(h(s)), &breaks, QUAD_REL_TOL, 1e-300 + QUAD_REL_TOL * mass.value * (hi - lo))?;
        Ok((top + log(mass.value) - self.ln_z, sign * (mode + first.value / mass.value)))
    }

    /// `Lambda(lambda) = log E[exp(lambda eta)]` by adaptive quadrature.
    pub fn log_mgf(&self, lambda: f64) -> Result<f64> {
        Ok(self.mgf_by_quadrature(lambda)?.0)
    }

    /// `Lambda'(lambda)`, the mean of the tilted law, by quadrature.
    pub fn log_mgf_derivative(&self, lambda: f64) -> Result<f64> {
        Ok(self.mgf_by_quadrature(lambda)?.1)
    }

    /// `(Lambda, Lambda')`, in closed form for `alpha` in `{1, 2}`.
    pub fn cumulant(&self, lambda: f64) -> Result<(f64, f64)> {
        self.check_mgf_domain(lambda)?;
        if self.alpha == 1.0 {
            let c2 = self.c * self.c;
            let l2 = lambda * lambda;
            Ok((-crate::math::log1p(-l2 / c2), 2.0 * lambda / (c2 - l2)))
        } else if self.alpha == 2.0 {
            Ok((lambda * lambda / (4.0 * self.c), lambda / (2.0 * self.c)))
        } else {
            self.mgf_by_quadrature(lambda)
        }
    }

    /// `x^dual / (dual (alpha c)^{dual - 1})`, the large-`x` behaviour of `Lambda`.
    pub fn kasahara_asymptote(&self, x: f64) -> Result<f64> {
        if self.alpha == 1.0 {
            return Err(invalid("the asymptote needs alpha > 1"));
        }
        if !(x > 0.0) {
            return Err(invalid("the asymptote needs x > 0"));
        }
        let q = self.dual();
        Ok(pow(x, q) / (q * pow(self.alpha * self.c, q - 1.0)))
    }

    /// `nu(delta) = E[eta^2 exp(delta |eta|)]`.
    pub fn moment_nu(&self, delta: f64) -> Result<f64> {
        if delta < 0.0 || !delta.is_finite() {
            return Err(invalid("delta must be finite and >= 0"));
        }
        self.check_mgf_domain(delta)?;
        let (a, c) = (self.alpha, self.c);
        // log-concave on t > 0; the mode solves 2/t + delta = c a t^{a-1}
        let h = |t: f64| 2.0 * log(t) + delta * t - c * pow(t, a);
        let slope = |t: f64| 2.0 / t + delta - c * a * pow(t, a - 1.0);
        let (mut lo, mut hi) = (1e-12, 1.0);
        while slope(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mode = 0.5 * (lo + hi);
        let top = h(mode);
        let mut right = mode * 2.0;
        while h(right) - top > -CUTOFF {
            right *= 2.0;
        }
        let r = integrate_pieces(|t| if t > 0.0 { exp(h(t) - top) } else { 0.0 }, &[0.0, mode, right], QUAD_REL_TOL, 0.0)?;
        Ok(2.0 * r.value * exp(top - self.ln_z))
    }

    /// Sampler for the law with density proportional to `exp(theta t) f(t)`.
    pub fn tilted(&self, theta: f64) -> Result<TiltedSampler> {
        self.check_mgf_domain(theta)?;
        if self.alpha == 1.0 {
            return Ok(TiltedSampler::Laplace {
                right_rate: self.c - theta,
                left_rate: self.c + theta,
                p_right: (self.c + theta) / (2.0 * self.c),
            });
        }
        if self.alpha == 2.0 {
            return Ok(TiltedSampler::Gaussian {
                mean: theta / (2.0 * self.c),
                sd: 1.0 / sqrt(2.0 * self.c),
            });
        }
        Ok(TiltedSampler::LogConcave(Envelope::new(self.alpha, self.c, theta, self.tilted_mode(theta))))
    }
}

/// Draws from an exponentially tilted scenery law.
#[derive(Debug, Clone)]
pub enum TiltedSampler {
    Laplace { right_rate: f64, left_rate: f64, p_right: f64 },
    Gaussian { mean: f64, sd: f64 },
    LogConcave(Envelope),
}

impl TiltedSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            TiltedSampler::Laplace {
                right_rate,
                left_rate,
                p_right,
            } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<f64>() < *p_right {
                    e / right_rate
                } else {
                    -e / left_rate
                }
            }
            TiltedSampler::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            TiltedSampler::LogConcave(env) => env.draw(rng),
        }
    }
}

/// Rejection envelope for `exp(h)` with `h(t) = theta t - c |t|^alpha`
/// concave: flat on `[l, r]` where `h` is within one unit of its peak and
/// tangent exponentials outside.
#[derive(Debug, Clone)]
pub struct Envelope {
    alpha: f64,
    c: f64,
    theta: f64,
    top: f64,
    l: f64,
    r: f64,
    slope_l: f64,
    slope_r: f64,
    w_left: f64,
    w_mid: f64,
}

impl Envelope {
    fn new(alpha: f64, c: f64, theta: f64, mode: f64) -> Self {
        let h = |t: f64| theta * t - c * pow(t.abs(), alpha);
        let dh = |t: f64| theta - c * alpha * pow(t.abs(), alpha - 1.0) * t.signum();
        let top = h(mode);
        let solve = |dir: f64| {
            let mut near = mode;
            let mut step = 1.0;
            while h(mode + dir * step) > top - 1.0 {
                near = mode + dir * step;
                step *= 2.0;
            }
            let mut far = mode + dir * step;
            for _ in 0..100 {
                let mid = 0.5 * (near + far);
                if h(mid) > top - 1.0 {
                    near = mid;
                } else {
                    far = mid;
                }
            }
            far
        };
        let l = solve(-1.0);
        let r = solve(1.0);
        let slope_l = dh(l);
        let slope_r = -dh(r);
        // masses relative to exp(top): tails carry exp(-1) / slope
        let w_left = exp(-1.0) / slope_l;
        let w_mid = r - l;
        let w_right = exp(-1.0) / slope_r;
        let total = w_left + w_mid + w_right;
        Envelope {
            alpha,
            c,
            theta,
            top,
            l,
            r,
            slope_l,
            slope_r,
            w_left: w_left / total,
            w_mid: w_mid / total,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            let (t, env) = if u < self.w_left {
                let e: f64 = Exp1.sample(rng);
                let t = self.l - e / self.slope_l;
                (t, self.top - 1.0 - e)
            } else if u < self.w_left + self.w_mid {
                (self.l + (self.r - self.l) * rng.random::<f64>(), self.top)
            } else {
                let e: f64 = Exp1.sample(rng);
                (self.r + e / self.slope_r, self.top - 1.0 - e)
            };
            let h = self.theta * t - self.c * pow(t.abs(), self.alpha);
            let accept: f64 = rng.random();
            if log(accept) <= h - env {
                return t;
            }
        }
    }
}

/// The scenery `eta(x)`, materialized lazily and fixed once drawn.
#[derive(Debug, Clone)]
pub struct SceneryField {
    source: Source,
    cache: HashMap<Site, f64, FxBuildHasher>,
}

#[derive(Debug, Clone)]
enum Source {
    /// Site values are a pure function of `(key, site)`.
    Keyed { dist: SceneryDistribution, key: u64 },
    /// Explicit values; unlisted sites read as 0.
    Fixed,
}

fn site_key(key: u64, site: &Site) -> u64 {
    site.0.iter().fold(key, |h, &c| mix64(h ^ (c as u32 as u64)))
}

impl SceneryField {
    pub fn keyed(dist: SceneryDistribution, seed: u64) -> Self {
        SceneryField {
            source: Source::Keyed {
                dist,
                key: rng::derive_key(seed, tag::SCENERY),
            },
            cache: HashMap::default(),
        }
    }

    pub fn fixed(values: impl IntoIterator<Item = (Site, f64)>) -> Self {
        SceneryField {
            source: Source::Fixed,
            cache: values.into_iter().collect(),
        }
    }

    pub fn value(&mut self, site: &Site) -> f64 {
        if let Some(&v) = self.cache.get(site) {
            return v;
        }
        let v = match &self.source {
            Source::Keyed { dist, key } => {
                let mut r = SplitMix64::seed_from_u64(site_key(*key, site));
                dist.draw(&mut r)
            }
            Source::Fixed => 0.0,
        };
        self.cache.insert(*site, v);
        v
    }

    /// Sites materialized so far.
    pub fn materialized(&self) -> usize {
        self.cache.len()
    }
}
