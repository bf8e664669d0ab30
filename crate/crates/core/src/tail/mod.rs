//! Estimating `P(X_n >= ny)`: plain Monte Carlo, a two-level tilted
//! estimator, an analytic lower bound, and the exponent fit.

mod proposal;

use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::estimate::{EstimatorId, MeanEstimate, TailEstimate};
use crate::math::{floor, linear_fit, log, log_sum_exp, pow, sqrt};
use crate::rng::{self, tag, Executor};
use crate::rwrs::{fill_local_times, sample_rwrs_replica};
use crate::scenery::{SceneryDistribution, TiltedSampler};
use crate::walk::{LocalTimeField, ReturnLaw, Site, WalkConfig, Walker};

pub use proposal::{BoostScratch, ReturnBoost};

/// Largest tilt the root search will consider.
pub const LAMBDA_MAX: f64 = 1e3;
const BISECTION_STEPS: usize = 80;
const BISECTION_REL_TOL: f64 = 1e-8;

fn check_y(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(invalid(alloc::format!("y must be positive, got {y}")))
    }
}

/// Frequency of `{X_n >= ny}` over independent RWRS samples.
pub fn naive_tail<E: Executor>(
    config: WalkConfig,
    dist: &SceneryDistribution,
    n: usize,
    y: f64,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<TailEstimate> {
    check_y(y)?;
    let threshold = n as f64 * y;
    let hits = exec.map(replicas, |i| sample_rwrs_replica(config, dist, n, seed, i as u64).x_n >= threshold);
    let count = hits.iter().filter(|&&h| h).count() as u64;
    Ok(TailEstimate::from_counts(count, replicas as u64, EstimatorId::Naive, seed))
}

/// Local times grouped by value: `(l, number of sites with local time l)`.
#[derive(Debug, Clone, Default)]
pub struct LocalTimeProfile {
    groups: Vec<(u32, u32)>,
}

impl LocalTimeProfile {
    pub fn new(lt: &LocalTimeField) -> Self {
        let mut ls: Vec<u32> = lt.iter().map(|(_, l)| l).collect();
        ls.sort_unstable();
        let mut groups: Vec<(u32, u32)> = Vec::new();
        for l in ls {
            match groups.last_mut() {
                Some((v, c)) if *v == l => *c += 1,
                _ => groups.push((l, 1)),
            }
        }
        LocalTimeProfile { groups }
    }

    pub fn groups(&self) -> &[(u32, u32)] {
        &self.groups
    }

    pub fn max(&self) -> u32 {
        self.groups.last().map_or(0, |g| g.0)
    }
}

/// A solved tilt: the root of `sum_x l(x) Lambda'(lambda l(x)) = target`, or
/// the `alpha = 1` cap when the root lies beyond it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tilt {
    pub lambda: f64,
    pub capped: bool,
}

/// Keeps `lambda * max l` this fraction below `c_alpha` when `alpha = 1`.
pub const ALPHA_ONE_MARGIN: f64 = 1e-3;

fn solve_tilt(profile: &LocalTimeProfile, dist: &SceneryDistribution, target: f64) -> Result<Tilt> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(invalid("the tilting target must be positive"));
    }
    let l_max = profile.max();
    if l_max == 0 {
        return Err(invalid("empty local-time field"));
    }
    let g = |lambda: f64| -> Result<f64> {
        let mut s = 0.0;
        for &(l, count) in profile.groups() {
            let l = l as f64;
            s += count as f64 * l * dist.cumulant(lambda * l)?.1;
        }
        Ok(s - target)
    };
    let (mut lo, mut hi);
    if dist.alpha() == 1.0 {
        let cap = dist.c() * (1.0 - ALPHA_ONE_MARGIN) / l_max as f64;
        if g(cap)? <= 0.0 {
            return Ok(Tilt {
                lambda: cap,
                capped: true,
            });
        }
        lo = 0.0;
        hi = cap;
    } else {
        lo = 0.0;
        hi = 1.0 / l_max as f64;
        while g(hi)? < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > LAMBDA_MAX {
                if g(LAMBDA_MAX)? < 0.0 {
                    return Err(Error::TargetUnreachable {
                        target,
                        lambda_max: LAMBDA_MAX,
                    });
                }
                hi = LAMBDA_MAX;
                break;
            }
        }
    }
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= BISECTION_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Tilt {
        lambda: 0.5 * (lo + hi),
        capped: false,
    })
}

/// The exponential tilt `lambda*` with `sum_x l(x) Lambda'(lambda* l(x)) = target`.
///
/// `g` is increasing (each `Lambda'` is), so the root is unique; it is found by
/// bracketing and bisection. For `alpha = 1` the tilt is capped so that
/// `lambda * max l` stays below `c_alpha`.
pub fn tilting_parameter(lt: &LocalTimeField, dist: &SceneryDistribution, target: f64) -> Result<Tilt> {
    solve_tilt(&LocalTimeProfile::new(lt), dist, target)
}

impl TiltedSampler {
    /// Sum of `k` independent draws.
    pub fn draw_sum<R: rand::Rng + ?Sized>(&self, k: u32, rng: &mut R) -> f64 {
        match self {
            TiltedSampler::Laplace {
                right_rate, left_rate, ..
            } if k > 1 => {
                // an asymmetric Laplace draw is E1/a - E2/b with E1, E2 ~ Exp(1)
                let g = Gamma::new(k as f64, 1.0).expect("positive shape");
                g.sample(rng) / right_rate - g.sample(rng) / left_rate
            }
            TiltedSampler::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                k as f64 * mean + sqrt(k as f64) * sd * z
            }
            _ => (0..k).map(|_| self.draw(rng)).sum(),
        }
    }
}

/// The product-tilted scenery law given local times.
struct TiltedScenery {
    lambda: f64,
    log_normalizer: f64,
    groups: Vec<(f64, u32, TiltedSampler)>,
}

impl TiltedScenery {
    fn new(profile: &LocalTimeProfile, dist: &SceneryDistribution, lambda: f64) -> Result<Self> {
        let mut log_normalizer = 0.0;
        let mut groups = Vec::with_capacity(profile.groups().len());
        for &(l, count) in profile.groups() {
            let theta = lambda * l as f64;
            log_normalizer += count as f64 * dist.cumulant(theta)?.0;
            groups.push((l as f64, count, dist.tilted(theta)?));
        }
        Ok(TiltedScenery {
            lambda,
            log_normalizer,
            groups,
        })
    }

    /// `X_n` under the tilted law.
    fn draw_x<R: RngCore>(&self, rng: &mut R) -> f64 {
        self.groups.iter().map(|(l, count, s)| l * s.draw_sum(*count, rng)).sum()
    }

    /// `log` of the likelihood ratio `exp(-lambda X + sum_x Lambda(lambda l(x)))`.
    fn log_weight(&self, x: f64) -> f64 {
        -self.lambda * x + self.log_normalizer
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedOptions {
    /// Boost returns to the origin in the outer walk sampler.
    pub boost_returns: bool,
    /// Return window for the boosted sampler.
    pub window: usize,
}

impl TiltedOptions {
    pub fn for_config(config: WalkConfig) -> Self {
        TiltedOptions {
            boost_returns: config.is_transient(),
            window: 64,
        }
    }
}

/// Two-level estimate of `P(X_n >= ny)`.
///
/// The outer level samples walks (with returns to the origin boosted for
/// transient walks, see [`ReturnBoost`]); given the local times, the inner
/// level draws the scenery from the product-tilted law, site `x` tilted by
/// `lambda* l(x)`, and averages `exp(-lambda* X_n + sum_x Lambda(lambda* l(x)))
/// 1{X_n >= ny}`. The variance is that of the per-walk averages, which
/// accounts for both levels.
#[allow(clippy::too_many_arguments)]
pub fn tilted_tail<E: Executor>(
    config: WalkConfig,
    dist: &SceneryDistribution,
    n: usize,
    y: f64,
    outer_replicas: usize,
    inner_replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<TailEstimate> {
    tilted_tail_with(config, dist, n, y, outer_replicas, inner_replicas, seed, TiltedOptions::for_config(config), exec)
}

#[allow(clippy::too_many_arguments)]
pub fn tilted_tail_with<E: Executor>(
    config: WalkConfig,
    dist: &SceneryDistribution,
    n: usize,
    y: f64,
    outer_replicas: usize,
    inner_replicas: usize,
    seed: u64,
    options: TiltedOptions,
    exec: &E,
) -> Result<TailEstimate> {
    check_y(y)?;
    if inner_replicas == 0 || outer_replicas == 0 {
        return Err(invalid("replica counts must be positive"));
    }
    let target = n as f64 * y;
    let boost = if options.boost_returns && n >= 2 * options.window && options.window >= 2 {
        let max_count = (3.0 * pow(target, dist.a())) as usize;
        let focus = focus_count(config, dist, n, y, max_count.max(1));
        let law = ReturnLaw::new(config, options.window);
        Some(ReturnBoost::new(&law, options.window, focus, max_count))
    } else {
        None
    };
    let ln_inner = log(inner_replicas as f64);
    let outcomes = exec.map(outer_replicas, |i| -> Result<f64> {
        let mut walker = Walker::new(config, rng::stream(seed, tag::TILTED, i as u64));
        let mut lt = LocalTimeField::new();
        let log_ratio = match &boost {
            Some(b) => b.sample(&mut walker, n, &mut lt, &mut BoostScratch::default()),
            None => {
                fill_local_times(&mut walker, n, &mut lt);
                0.0
            }
        };
        let profile = LocalTimeProfile::new(&lt);
        let tilt = solve_tilt(&profile, dist, target)?;
        let law = TiltedScenery::new(&profile, dist, tilt.lambda)?;
        let rng = walker.rng_mut();
        let inner: Vec<f64> = (0..inner_replicas)
            .map(|_| {
                let x = law.draw_x(rng);
                if x >= target {
                    law.log_weight(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Ok(log_ratio + log_sum_exp(inner.iter().copied()) - ln_inner)
    });
    let values = outcomes.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(TailEstimate::from_log_weights(&values, EstimatorId::Tilted, seed))
}

/// Return count maximizing the single-site lower bound; the return law is
/// tabulated on at most `FOCUS_HORIZON` steps, which only blurs small `k`.
fn focus_count(config: WalkConfig, dist: &SceneryDistribution, n: usize, y: f64, k_max: usize) -> usize {
    const FOCUS_HORIZON: usize = 4096;
    let law = ReturnLaw::new(config, n.min(FOCUS_HORIZON));
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..=k_max {
        let window = (n / k).min(law.horizon());
        let p = law.return_by(window);
        if p > 0.0 {
            let v = k as f64 * log(p) + dist.log_tail_unchecked(n as f64 * y / k as f64);
            if v > best.1 {
                best = (k, v);
            }
        }
    }
    best.0
}

/// Mean of the tilted likelihood ratio without the indicator; equals 1.
pub fn tilted_weight_normalization(
    lt: &LocalTimeField,
    dist: &SceneryDistribution,
    target: f64,
    replicas: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    let profile = LocalTimeProfile::new(lt);
    let tilt = solve_tilt(&profile, dist, target)?;
    let law = TiltedScenery::new(&profile, dist, tilt.lambda)?;
    let mut r = rng::stream(seed, tag::TILTED, u64::MAX);
    let w: Vec<f64> = (0..replicas).map(|_| crate::math::exp(law.log_weight(law.draw_x(&mut r)))).collect();
    Ok(MeanEstimate::from_samples(&w))
}

/// `log P(H_0 <= floor(n/k))^k + log P(eta > ny/k)` for a tabulated return law.
///
/// `k` returns each within `n/k` steps give `l_n(0) >= k`, and then
/// `l_n(0) eta(0) > ny` as soon as `eta(0) > ny/k`.
pub fn lower_bound_with_law(law: &ReturnLaw, dist: &SceneryDistribution, n: u64, y: f64, k: u64) -> Result<f64> {
    check_y(y)?;
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let window = (n / k) as usize;
    if window > law.horizon() {
        return Err(invalid("return law tabulated on too short a horizon"));
    }
    let p = law.return_by(window);
    if !(p > 0.0) {
        return Err(Error::EmptyReturnWindow { n, k });
    }
    Ok(k as f64 * log(p) + dist.log_tail_unchecked(n as f64 * y / k as f64))
}

/// The lower bound at `k`, by default `floor((ny)^a)` (at least 1).
pub fn lower_bound(config: WalkConfig, dist: &SceneryDistribution, n: u64, y: f64, k: Option<u64>) -> Result<TailEstimate> {
    check_y(y)?;
    let k = k.unwrap_or_else(|| (floor(pow(n as f64 * y, dist.a())) as u64).max(1));
    let law = ReturnLaw::new(config, (n / k.max(1)) as usize);
    let value = lower_bound_with_law(&law, dist, n, y, k)?;
    Ok(TailEstimate::exact(value, EstimatorId::LowerBound, 0))
}

/// The lower bound for each `k` in `1..=k_max` (`-inf` where undefined) and the maximizing `k`.
pub fn lower_bound_scan(
    config: WalkConfig,
    dist: &SceneryDistribution,
    n: u64,
    y: f64,
    k_max: u64,
) -> Result<(u64, Vec<f64>)> {
    check_y(y)?;
    let law = ReturnLaw::new(config, n as usize);
    let mut values = Vec::with_capacity(k_max as usize);
    let mut best = (0, f64::NEG_INFINITY);
    for k in 1..=k_max {
        let v = match lower_bound_with_law(&law, dist, n, y, k) {
            Ok(v) => v,
            Err(Error::EmptyReturnWindow { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        if v > best.1 {
            best = (k, v);
        }
        values.push(v);
    }
    if best.0 == 0 {
        return Err(Error::EmptyReturnWindow { n, k: 1 });
    }
    Ok((best.0, values))
}

/// Least-squares fit of `log(-log P)` against `log(ny)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    /// `(log(ny), log(-log P))`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residual_norm: f64,
}

/// Fits the speed exponent from `(ny, log P)` pairs.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(invalid("at least three points are needed"));
    }
    let mut pts = Vec::with_capacity(points.len());
    for &(scale, log_p) in points {
        if !(scale > 0.0) {
            return Err(invalid("ny must be positive"));
        }
        if !(log_p < 0.0 && log_p.is_finite()) {
            return Err(invalid("probabilities must lie strictly between 0 and 1"));
        }
        pts.push((log(scale), log(-log_p)));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| invalid("points must have distinct ny"))?;
    if !fit.slope.is_finite() {
        return Err(invalid("non-finite slope"));
    }
    Ok(ExponentFit {
        points: pts,
        slope: fit.slope,
        intercept: fit.intercept,
        residual_norm: fit.residual_norm,
    })
}

/// Local time at the origin of a field, for diagnostics.
pub fn origin_local_time(lt: &LocalTimeField) -> u32 {
    lt.get(&Site::ORIGIN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;

    fn gaussian() -> SceneryDistribution {
        SceneryDistribution::new(2.0, 1.0).unwrap()
    }

    #[test]
    fn single_site_gaussian_tilt() {
        let lt = LocalTimeField::from_counts([(Site::ORIGIN, 1)]).unwrap();
        for &t in &[0.1, 1.0, 7.5] {
            let tilt = tilting_parameter(&lt, &gaussian(), t).unwrap();
            assert!((tilt.lambda - 2.0 * t).abs() < 1e-7 * t);
        }
        // l = 2: 2 Lambda'(2 lambda) = 2 lambda, so target 2 gives lambda = 1
        let lt2 = LocalTimeField::from_counts([(Site::ORIGIN, 2)]).unwrap();
        let a = tilting_parameter(&lt2, &gaussian(), 2.0).unwrap().lambda;
        assert!((a - 1.0).abs() < 1e-7);
        assert!(tilting_parameter(&lt, &gaussian(), 0.0).is_err());
    }

    #[test]
    fn unreachable_target() {
        let lt = LocalTimeField::from_counts([(Site::ORIGIN, 1)]).unwrap();
        assert!(matches!(
            tilting_parameter(&lt, &gaussian(), 1e6),
            Err(Error::TargetUnreachable { .. })
        ));
    }

    #[test]
    fn laplace_tilt_is_capped() {
        let d = SceneryDistribution::new(1.0, 1.0).unwrap();
        let lt = LocalTimeField::from_counts([(Site::ORIGIN, 4)]).unwrap();
        let t = tilting_parameter(&lt, &d, 1e9).unwrap();
        assert!(t.capped);
        assert!(t.lambda * 4.0 < 1.0);
        let small = tilting_parameter(&lt, &d, 1.0).unwrap();
        assert!(!small.capped);
    }

    #[test]
    fn laplace_group_sums() {
        let d = SceneryDistribution::new(1.0, 1.0).unwrap();
        let s = d.tilted(0.4).unwrap();
        let mut r = rng::stream(0, 0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| s.draw_sum(5, &mut r)).collect();
        let (m, se) = crate::math::mean_and_se(&xs);
        let want = 5.0 * d.cumulant(0.4).unwrap().1;
        assert!((m - want).abs() < 4.0 * se);
    }

    #[test]
    fn exact_power_fits() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 1e4].iter().map(|&x: &f64| (x, -pow(x, 0.5))).collect();
        assert!((fit_exponent(&pts).unwrap().slope - 0.5).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [3.0, 30.0, 300.0].iter().map(|&x: &f64| (x, -2.0 * pow(x, 0.6))).collect();
        assert!((fit_exponent(&pts).unwrap().slope - 0.6).abs() < 1e-12);
        assert!(fit_exponent(&[(1.0, -1.0), (2.0, 0.0), (3.0, -2.0)]).is_err());
        assert!(fit_exponent(&[(1.0, -1.0), (2.0, -2.0)]).is_err());
    }

    #[test]
    fn lower_bound_single_visit() {
        let cfg = WalkConfig::simple(3).unwrap();
        let d = SceneryDistribution::new(1.0, 1.0).unwrap();
        let n = 50;
        let got = lower_bound(cfg, &d, n, 0.2, Some(1)).unwrap().log_probability;
        let law = ReturnLaw::new(cfg, n as usize);
        let want = log(law.return_by(n as usize)) + (-10.0 - log(2.0));
        assert!((got - want).abs() < 1e-12);
        assert!(exp(got) < 1.0);
    }
}
