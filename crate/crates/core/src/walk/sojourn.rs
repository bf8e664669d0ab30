//! Sojourn times, returns and Green-function estimates for transient walks.
//!
//! A transient walk never stops, so every run is cut off. Runs end at a step
//! horizon, optionally at the first exit from a sup-norm ball, and optionally
//! pass a Russian-roulette shell: on first reaching radius `r` the walk
//! survives with probability `q` and carries weight `1/q` afterwards. The
//! shell keeps estimates unbiased for the horizon while sparing most of the
//! cost of walks that have already wandered off.

use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::{Rng, RngCore};
use rustc_hash::FxBuildHasher;

use super::{Site, WalkConfig, Walker};
use crate::error::{invalid, Error, Result};
use crate::estimate::{EstimatorId, MeanEstimate, TailEstimate};
use crate::math::{linear_fit, log, pow, round};
use crate::rng::{self, tag, Executor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roulette {
    pub radius: u32,
    pub survival: f64,
}

impl Roulette {
    pub const DEFAULT: Roulette = Roulette {
        radius: 32,
        survival: 1.0 / 16.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub horizon: u64,
    pub escape_radius: Option<u32>,
    pub roulette: Option<Roulette>,
}

impl Truncation {
    pub fn horizon(steps: u64) -> Self {
        Truncation {
            horizon: steps,
            escape_radius: None,
            roulette: None,
        }
    }

    pub fn with_escape(mut self, radius: u32) -> Self {
        self.escape_radius = Some(radius);
        self
    }

    pub fn with_roulette(mut self, roulette: Roulette) -> Self {
        self.roulette = Some(roulette);
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(r) = self.roulette {
            if !(r.survival > 0.0 && r.survival <= 1.0) {
                return Err(invalid("roulette survival must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// A finite set of lattice sites.
#[derive(Debug, Clone)]
pub struct Region {
    sites: Vec<Site>,
    set: HashSet<Site, FxBuildHasher>,
    lo: Site,
    hi: Site,
    is_box: bool,
}

impl Region {
    pub fn new(sites: impl IntoIterator<Item = Site>) -> Self {
        let mut set: HashSet<Site, FxBuildHasher> = HashSet::default();
        let mut list = Vec::new();
        for s in sites {
            if set.insert(s) {
                list.push(s);
            }
        }
        let mut lo = Site([i32::MAX; super::MAX_DIM]);
        let mut hi = Site([i32::MIN; super::MAX_DIM]);
        for s in &list {
            for i in 0..super::MAX_DIM {
                lo.0[i] = lo.0[i].min(s.0[i]);
                hi.0[i] = hi.0[i].max(s.0[i]);
            }
        }
        let volume: i64 = if list.is_empty() {
            0
        } else {
            (0..super::MAX_DIM).map(|i| (hi.0[i] - lo.0[i] + 1) as i64).product()
        };
        Region {
            is_box: volume == list.len() as i64 && !list.is_empty(),
            sites: list,
            set,
            lo,
            hi,
        }
    }

    #[inline]
    pub fn contains(&self, s: &Site) -> bool {
        for i in 0..super::MAX_DIM {
            if s.0[i] < self.lo.0[i] || s.0[i] > self.hi.0[i] {
                return false;
            }
        }
        self.is_box || self.set.contains(s)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Largest side of the bounding box, in sites.
    pub fn extent(&self) -> u32 {
        if self.is_empty() {
            return 0;
        }
        (0..super::MAX_DIM).map(|i| (self.hi.0[i] - self.lo.0[i] + 1) as u32).max().unwrap_or(0)
    }

    /// Sup-norm radius of the smallest origin-centred ball containing the region.
    pub fn radius(&self) -> u32 {
        self.sites.iter().map(Site::norm).max().unwrap_or(0)
    }

    /// The default exit radius, 64 times the extent.
    pub fn default_escape_radius(&self) -> u32 {
        64 * self.extent().max(1)
    }
}

/// The box `{-floor(m/2), ..., m - 1 - floor(m/2)}^d`, which contains the origin.
pub fn box_region(dim: usize, side: u32) -> Region {
    let side = side as i32;
    let lo = -(side / 2);
    let mut sites = Vec::new();
    if side == 0 {
        return Region::new(sites);
    }
    let count = (side as usize).pow(dim as u32);
    for mut idx in 0..count {
        let mut s = Site::ORIGIN;
        for axis in 0..dim {
            s.0[axis] = lo + (idx % side as usize) as i32;
            idx /= side as usize;
        }
        sites.push(s);
    }
    Region::new(sites)
}

/// Occupation count of a region and whether the horizon cut the run short.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sojourn {
    pub count: u64,
    /// The horizon stopped the run before the walk left the escape ball.
    pub truncated: bool,
}

fn require_transient(config: WalkConfig) -> Result<()> {
    if config.is_transient() {
        Ok(())
    } else {
        Err(Error::RecurrentWalk(config.dim()))
    }
}

/// Counts visits to `region` until the horizon or the first exit from the
/// sup-norm ball of radius `escape_radius`.
pub fn sojourn_in<R: RngCore>(walker: &mut Walker<R>, region: &Region, horizon: u64, escape_radius: u32) -> Sojourn {
    walker.set_position(Site::ORIGIN);
    if region.is_empty() {
        return Sojourn {
            count: 0,
            truncated: false,
        };
    }
    let mut count = u64::from(region.contains(&Site::ORIGIN));
    for _ in 0..horizon {
        if let Some(axis) = walker.step_axis() {
            if walker.position().0[axis].unsigned_abs() > escape_radius {
                return Sojourn { count, truncated: false };
            }
        }
        if region.contains(&walker.position()) {
            count += 1;
        }
    }
    Sojourn { count, truncated: true }
}

/// Total time spent in `region`, approximating `l_infinity(region)`.
///
/// Replica `index` of the `(seed, tag::SOJOURN)` family; two calls with the
/// same seed follow the same walk.
pub fn sojourn_time(
    config: WalkConfig,
    region: &Region,
    horizon: u64,
    escape_radius: Option<u32>,
    seed: u64,
    index: u64,
) -> Result<Sojourn> {
    require_transient(config)?;
    let radius = escape_radius.unwrap_or_else(|| region.default_escape_radius());
    if !region.is_empty() && 2 * region.radius() > radius {
        return Err(invalid("the region must lie inside half the escape ball"));
    }
    let mut walker = Walker::new(config, rng::stream(seed, tag::SOJOURN, index));
    Ok(sojourn_in(&mut walker, region, horizon, radius))
}

/// Runs one truncated walk, reporting every position (time 0 included) with
/// its current roulette weight until `visit` returns false.
fn run_weighted<R: RngCore>(walker: &mut Walker<R>, trunc: &Truncation, mut visit: impl FnMut(&Site, f64) -> bool) {
    walker.set_position(Site::ORIGIN);
    let mut weight = 1.0;
    if !visit(&Site::ORIGIN, weight) {
        return;
    }
    let mut shell = trunc.roulette;
    for _ in 0..trunc.horizon {
        if let Some(axis) = walker.step_axis() {
            let c = walker.position().0[axis].unsigned_abs();
            if let Some(r) = shell {
                if c >= r.radius {
                    shell = None;
                    if walker.rng_mut().random::<f64>() < r.survival {
                        weight /= r.survival;
                    } else {
                        return;
                    }
                }
            }
            if trunc.escape_radius.is_some_and(|e| c > e) {
                return;
            }
        }
        if !visit(&walker.position(), weight) {
            return;
        }
    }
}

/// Weights at the first `k_max` visits to the origin (0 where not reached).
fn origin_visit_weights<R: RngCore>(walker: &mut Walker<R>, trunc: &Truncation, k_max: usize) -> Vec<f64> {
    let mut out = alloc::vec![0.0; k_max];
    let mut seen = 0;
    run_weighted(walker, trunc, |s, w| {
        if s.is_origin() {
            out[seen] = w;
            seen += 1;
        }
        seen < k_max
    });
    out
}

fn to_logs(w: &[f64]) -> Vec<f64> {
    w.iter().map(|&x| if x > 0.0 { log(x) } else { f64::NEG_INFINITY }).collect()
}

/// Fraction of walks returning to the origin within the truncation.
///
/// The horizon biases the estimate down by `P(T < H_0 < infinity)`; for
/// `d <= 2` the estimate tends to 1 as the horizon grows.
pub fn estimate_return_prob<E: Executor>(
    config: WalkConfig,
    replicas: usize,
    trunc: Truncation,
    seed: u64,
    exec: &E,
) -> Result<TailEstimate> {
    trunc.validate()?;
    let w = exec.map(replicas, |i| {
        let mut walker = Walker::new(config, rng::stream(seed, tag::RETURN, i as u64));
        origin_visit_weights(&mut walker, &trunc, 2)[1]
    });
    Ok(TailEstimate::from_log_weights(&to_logs(&w), EstimatorId::Naive, seed))
}

/// `P(l_infinity(0) >= k)` for `k = 1..=k_max`, from one shared set of walks.
pub fn local_time_distribution<E: Executor>(
    config: WalkConfig,
    k_max: usize,
    replicas: usize,
    trunc: Truncation,
    seed: u64,
    exec: &E,
) -> Result<Vec<TailEstimate>> {
    require_transient(config)?;
    trunc.validate()?;
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let runs = exec.map(replicas, |i| {
        let mut walker = Walker::new(config, rng::stream(seed, tag::SOJOURN, i as u64));
        origin_visit_weights(&mut walker, &trunc, k_max)
    });
    Ok((0..k_max)
        .map(|k| {
            let col: Vec<f64> = runs.iter().map(|r| r[k]).collect();
            TailEstimate::from_log_weights(&to_logs(&col), EstimatorId::Naive, seed)
        })
        .collect())
}

/// `P(l_infinity(0) >= k)`.
pub fn local_time_tail<E: Executor>(
    config: WalkConfig,
    k: usize,
    replicas: usize,
    trunc: Truncation,
    seed: u64,
    exec: &E,
) -> Result<TailEstimate> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut all = local_time_distribution(config, k, replicas, trunc, seed, exec)?;
    Ok(all.swap_remove(k - 1))
}

/// `G(0, y) = E_0[l_infinity(y)]`.
pub fn green_function<E: Executor>(
    config: WalkConfig,
    target: Site,
    replicas: usize,
    trunc: Truncation,
    seed: u64,
    exec: &E,
) -> Result<MeanEstimate> {
    require_transient(config)?;
    trunc.validate()?;
    let values = exec.map(replicas, |i| {
        let mut walker = Walker::new(config, rng::stream(seed, tag::GREEN, i as u64));
        let mut total = 0.0;
        run_weighted(&mut walker, &trunc, |s, w| {
            if *s == target {
                total += w;
            }
            true
        });
        total
    });
    Ok(MeanEstimate::from_samples(&values))
}

/// Exponential decay of `P(l_infinity(box) > t)` in units of `t / |box|^{2/d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationFit {
    pub side: u32,
    pub volume: usize,
    /// `(t, exceedances, -ln P(l > t))` at each fitted threshold.
    pub points: Vec<(u64, u64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Fraction of runs stopped by the horizon rather than the escape ball.
    pub truncated_rate: f64,
}

/// Draws sojourn times of the box of the given side (containing the origin)
/// and fits `-ln P(l > t)` against `t / |box|^{2/d}`.
///
/// Thresholds are up to six equally spaced integers between the median count
/// and the largest `t` still exceeded `min_hits` times.
pub fn localization_fit<E: Executor>(
    config: WalkConfig,
    side: u32,
    replicas: usize,
    horizon: u64,
    min_hits: u64,
    seed: u64,
    exec: &E,
) -> Result<LocalizationFit> {
    require_transient(config)?;
    if side == 0 {
        return Err(invalid("box side must be positive"));
    }
    if replicas == 0 {
        return Err(invalid("replicas must be positive"));
    }
    let region = box_region(config.dim(), side);
    let runs = exec.map(replicas, |i| sojourn_time(config, &region, horizon, None, seed, i as u64));
    let runs: Vec<Sojourn> = runs.into_iter().collect::<Result<_>>()?;
    let mut counts: Vec<u64> = runs.iter().map(|r| r.count).collect();
    counts.sort_unstable();
    let m = counts.len();
    let exceed = |t: u64| (m - counts.partition_point(|&c| c <= t)) as u64;
    let lo = counts[m / 2];
    let mut hi = lo;
    for &c in counts[m / 2..].iter().rev() {
        if exceed(c) >= min_hits {
            hi = c;
            break;
        }
    }
    let mut ts: Vec<u64> = (0..6).map(|j| lo + round((hi - lo) as f64 * j as f64 / 5.0) as u64).collect();
    ts.dedup();
    let scale = pow(region.len() as f64, 2.0 / config.dim() as f64);
    let points: Vec<(u64, u64, f64)> = ts
        .iter()
        .map(|&t| (t, exceed(t)))
        .filter(|&(_, k)| k >= min_hits)
        .map(|(t, k)| (t, k, -log(k as f64 / m as f64)))
        .collect();
    if points.len() < 5 {
        return Err(invalid("too few resolved thresholds; increase replicas"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64 / scale).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| invalid("degenerate thresholds"))?;
    Ok(LocalizationFit {
        side,
        volume: region.len(),
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        truncated_rate: runs.iter().filter(|r| r.truncated).count() as f64 / m as f64,
    })
}
