//! Classification of the range by local-time magnitude, used to split
//! `{X_n > ny}` into events that are each easy to bound.
//!
//! Sites are sorted into
//!
//! * `down`:    `l < z n^b`
//! * level 0:   `z n^b <= l < y^a n^b`
//! * level `i`: `y^a n^{b_i} <= l < y^a n^{b_{i+1}}` for `1 <= i <= N`
//! * `up`:      `l >= (yn)^a`
//!
//! with `b = b_1 < ... < b_{N+1} = a`. The gaps `b_{i+1} - b_i` grow
//! geometrically from the top so that the level budgets `y_i` stay bounded
//! below uniformly in `n`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::estimate::{EstimatorId, TailEstimate};
use crate::math::{exp, log, pow, ExactSum};
use crate::rng::{self, tag, Executor};
use crate::rwrs::{fill_local_times, RwrsSample};
use crate::scenery::{SceneryDistribution, SceneryField};
use crate::walk::{LocalTimeField, WalkConfig, Walker};

/// Default `z` in the `down` threshold `z n^b`.
pub const DEFAULT_Z_THRESHOLD: f64 = 0.1;
/// Default window for `chi = z_1 log n`.
pub const DEFAULT_CHI_RANGE: (f64, f64) = (0.5, 2.0);
/// Relative tolerance of the invariant checks.
pub const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionScheme {
    pub alpha: f64,
    pub dim: usize,
    pub n: u64,
    pub y: f64,
    /// `(1/alpha - 2/d) / (1 - 2/d)`.
    pub delta0: f64,
    /// `(delta0/2) / (1 - delta0/2)`.
    pub eps0: f64,
    /// `z_1 log n`; zero when `alpha = 1` (no intermediate levels).
    pub chi: f64,
    pub beta: f64,
    /// Number of intermediate levels `N`.
    pub levels: usize,
    /// `b_1, ..., b_{N+1}`.
    pub b: Vec<f64>,
    /// Gaps `z_1 = a - b_N, z_2 = b_N - b_{N-1}, ..., z_N = b_2 - b_1`.
    pub z: Vec<f64>,
    /// Budgets `y_0, ..., y_N`.
    pub y_levels: Vec<f64>,
    pub y_down: f64,
    pub y_up: f64,
    pub z_threshold: f64,
    /// `gamma_i = (a - b_i) / (1 - 2/d)` for `i = 0..=N`, with `b_0 := b_1`.
    pub gamma: Vec<f64>,
}

/// Builds the scheme for `1 <= alpha < d/2`.
///
/// `N` is the smallest level count for which `chi = (a - b) log n /
/// (1 + eps0)^{N-1}` falls in `chi_range`; `beta` then solves the budget
/// `sum_i y_i = y/3` exactly. At `alpha = 1` there are no intermediate levels
/// and `y_0 = y_down = y_up = y/3`.
pub fn build_scheme(
    alpha: f64,
    dim: usize,
    n: u64,
    y: f64,
    z_threshold: f64,
    chi_range: (f64, f64),
) -> Result<PartitionScheme> {
    if dim < 3 {
        return Err(Error::RecurrentWalk(dim));
    }
    if !(alpha >= 1.0 && alpha < dim as f64 / 2.0) {
        return Err(Error::RegimeViolation { alpha, dim });
    }
    if n < 2 {
        return Err(invalid("n must be at least 2"));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(invalid("y must be positive"));
    }
    if !(z_threshold > 0.0 && z_threshold.is_finite()) {
        return Err(invalid("z threshold must be positive"));
    }
    let (lo, hi) = chi_range;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(invalid("chi range must satisfy 0 < lo < hi"));
    }
    let d = dim as f64;
    let a = alpha / (alpha + 1.0);
    let b0 = 1.0 / (alpha + 1.0);
    let delta0 = (1.0 / alpha - 2.0 / d) / (1.0 - 2.0 / d);
    let eps0 = (delta0 / 2.0) / (1.0 - delta0 / 2.0);
    let third = y / 3.0;
    let gamma_of = |bi: f64| (a - bi) / (1.0 - 2.0 / d);

    if alpha == 1.0 {
        let scheme = PartitionScheme {
            alpha,
            dim,
            n,
            y,
            delta0,
            eps0,
            chi: 0.0,
            beta: 1.0 / 3.0,
            levels: 0,
            b: alloc::vec![a],
            z: Vec::new(),
            y_levels: alloc::vec![third],
            y_down: third,
            y_up: third,
            z_threshold,
            gamma: alloc::vec![gamma_of(b0)],
        };
        scheme.check_invariants()?;
        return Ok(scheme);
    }

    let ln_n = log(n as f64);
    let span = (a - b0) * ln_n;
    let mut levels = 1usize;
    let mut chi = span;
    while chi > hi {
        levels += 1;
        chi = span / pow(1.0 + eps0, (levels - 1) as f64);
    }
    if chi < lo {
        return Err(Error::NoAdmissibleLevels { lo, hi });
    }

    let z1 = chi / ln_n;
    let z: Vec<f64> = (1..=levels)
        .map(|i| if i == 1 { z1 } else { pow(1.0 + eps0, (i - 2) as f64) * eps0 * z1 })
        .collect();
    // b_{N+1} = a, then b_{N+1-k} = b_{N+2-k} - z_k
    let mut b = alloc::vec![0.0; levels + 1];
    b[levels] = a;
    for k in 1..=levels {
        b[levels - k] = b[levels + 1 - k] - z[k - 1];
    }
    // the last subtraction accumulates rounding; b_1 is b by construction
    b[0] = b0;

    let top = exp(chi * (1.0 - delta0));
    let lower: Vec<f64> = (0..levels)
        .map(|i| exp(-chi * eps0 * pow(1.0 + eps0, (levels - i - 1) as f64)))
        .collect();
    let beta = (1.0 / 3.0) / (top + lower.iter().sum::<f64>());
    let mut y_levels: Vec<f64> = lower.iter().map(|&e| beta * y * e).collect();
    y_levels.push(beta * y * top);

    let mut gamma = alloc::vec![gamma_of(b[0])];
    gamma.extend(b[..levels].iter().map(|&bi| gamma_of(bi)));

    let scheme = PartitionScheme {
        alpha,
        dim,
        n,
        y,
        delta0,
        eps0,
        chi,
        beta,
        levels,
        b,
        z,
        y_levels,
        y_down: third,
        y_up: third,
        z_threshold,
        gamma,
    };
    scheme.check_invariants()?;
    Ok(scheme)
}

/// Scheme with the default `z` and `chi` window.
pub fn default_scheme(alpha: f64, dim: usize, n: u64, y: f64) -> Result<PartitionScheme> {
    build_scheme(alpha, dim, n, y, DEFAULT_Z_THRESHOLD, DEFAULT_CHI_RANGE)
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= INVARIANT_TOL * x.abs().max(y.abs()).max(1.0)
}

fn broken(what: &str) -> Error {
    Error::Invariant(String::from(what))
}

impl PartitionScheme {
    pub fn a(&self) -> f64 {
        self.alpha / (self.alpha + 1.0)
    }

    pub fn b_exponent(&self) -> f64 {
        1.0 / (self.alpha + 1.0)
    }

    /// Class thresholds in increasing order: `z n^b`, then `y^a n^{b_i}` for
    /// `i = 1..=N`, then `(yn)^a`. A local time `l` belongs to the class
    /// indexed by how many thresholds are `<= l`.
    pub fn thresholds(&self) -> Vec<f64> {
        let n = self.n as f64;
        let a = self.a();
        let ya = pow(self.y, a);
        let mut t = alloc::vec![self.z_threshold * pow(n, self.b_exponent())];
        t.extend(self.b[..self.levels].iter().map(|&bi| ya * pow(n, bi)));
        t.push(pow(self.y * n, a));
        t
    }

    /// `(yn)^a`.
    pub fn up_threshold(&self) -> f64 {
        pow(self.y * self.n as f64, self.a())
    }

    /// Checks every structural identity to relative tolerance `1e-12`.
    pub fn check_invariants(&self) -> Result<()> {
        let a = self.a();
        let b = self.b_exponent();
        let d = self.dim as f64;
        if !close(a + b, 1.0) {
            return Err(broken("a + b = 1"));
        }
        let delta0 = (1.0 / self.alpha - 2.0 / d) / (1.0 - 2.0 / d);
        if !close(self.delta0, delta0) || !(self.delta0 > 0.0 && self.delta0 <= 1.0) {
            return Err(broken("delta0 formula"));
        }
        if self.alpha > 1.0 && self.delta0 >= 1.0 {
            return Err(broken("delta0 < 1"));
        }
        if !close(self.eps0, (self.delta0 / 2.0) / (1.0 - self.delta0 / 2.0)) {
            return Err(broken("eps0 formula"));
        }
        let total = self.y_levels.iter().sum::<f64>() + self.y_down + self.y_up;
        if !close(total, self.y) {
            return Err(broken("budgets sum to y"));
        }
        if !close(self.y_down, self.y / 3.0) || !close(self.y_up, self.y / 3.0) {
            return Err(broken("y_down = y_up = y/3"));
        }
        if self.y_levels.len() != self.levels + 1
            || self.b.len() != self.levels + 1
            || self.z.len() != self.levels
            || self.gamma.len() != self.levels + 1
        {
            return Err(broken("list lengths"));
        }
        if self.y_levels.iter().any(|&v| !(v > 0.0)) || !(self.beta > 0.0) {
            return Err(broken("positive budgets"));
        }
        if !close(self.b[0], b) || !close(self.b[self.levels], a) {
            return Err(broken("b_1 = b and b_{N+1} = a"));
        }
        if self.b.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(broken("b strictly increasing"));
        }
        if self.levels == 0 {
            return Ok(());
        }
        let n = self.n as f64;
        if !close(self.z.iter().sum::<f64>(), a - b) {
            return Err(broken("sum of gaps = a - b"));
        }
        if !close(self.z[0], self.chi / log(n)) {
            return Err(broken("z_1 = chi / log n"));
        }
        for (k, &zk) in self.z.iter().enumerate() {
            let gap = self.b[self.levels - k] - self.b[self.levels - k - 1];
            if !close(zk, gap) {
                return Err(broken("gaps match b"));
            }
            let want = match k {
                0 => zk,
                1 => self.eps0 * self.z[0],
                _ => (1.0 + self.eps0) * self.z[k - 1],
            };
            if !close(zk, want) {
                return Err(broken("geometric gap recursion"));
            }
        }
        // beta y <= y_i n^{(a - b_{i+1}) - (1 - delta0)(a - b_i)}; b_0 extends
        // the recursion one step below b, a - b_0 = (1 + eps0)(a - b)
        let b_at = |i: usize| if i == 0 { a - (1.0 + self.eps0) * (a - b) } else { self.b[i - 1] };
        for i in 0..=self.levels {
            let exponent = (a - b_at(i + 1)) - (1.0 - self.delta0) * (a - b_at(i));
            let rhs = self.y_levels[i] * exp(exponent * log(n));
            let lhs = self.beta * self.y;
            if lhs > rhs * (1.0 + INVARIANT_TOL) {
                return Err(broken("level budget requirement"));
            }
        }
        if self.gamma.windows(2).skip(1).any(|w| !(w[0] > w[1])) || !close(self.gamma[0], self.gamma[1]) {
            return Err(broken("gamma decreasing"));
        }
        if !(self.gamma[0] < a) || !(a * self.alpha - (self.alpha - 1.0) * self.gamma[0] > a) {
            return Err(broken("gamma_0 < a"));
        }
        Ok(())
    }

    /// Class of a site with local time `l`.
    pub fn class_of(&self, l: u32) -> SiteClass {
        let l = l as f64;
        let t = self.thresholds();
        let k = t.iter().take_while(|&&th| th <= l).count();
        match k {
            0 => SiteClass::Down,
            k if k == t.len() => SiteClass::Up,
            k => SiteClass::Level(k - 1),
        }
    }

    /// Number of classes: down, levels `0..=N`, up.
    pub fn class_count(&self) -> usize {
        self.levels + 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteClass {
    Down,
    /// Level `0..=N`.
    Level(usize),
    Up,
}

impl SiteClass {
    /// Position in `down, 0, 1, ..., N, up`.
    pub fn index(self, levels: usize) -> usize {
        match self {
            SiteClass::Down => 0,
            SiteClass::Level(i) => i + 1,
            SiteClass::Up => levels + 2,
        }
    }
}

/// Class of every range site plus per-class sums of `l(x) eta(x)`.
#[derive(Debug, Clone)]
pub struct RangeClassification {
    /// One label per site, in first-visit order.
    pub labels: Vec<SiteClass>,
    /// Indexed by [`SiteClass::index`].
    pub counts: Vec<usize>,
    sums: Vec<ExactSum>,
}

impl RangeClassification {
    /// Per-class sums, correctly rounded.
    pub fn class_sums(&self) -> Vec<f64> {
        self.sums.iter().map(ExactSum::value).collect()
    }

    /// Sum over all classes, rounded once; equals the exact `X_n`.
    pub fn total(&self) -> f64 {
        let mut acc = ExactSum::new();
        for s in &self.sums {
            acc.merge(s);
        }
        acc.value()
    }
}

fn check_length(lt: &LocalTimeField, scheme: &PartitionScheme) -> Result<()> {
    if lt.total_visits() != scheme.n + 1 {
        return Err(invalid("local times and scheme disagree on n"));
    }
    Ok(())
}

fn classify_values(
    lt: &LocalTimeField,
    values: impl Iterator<Item = f64>,
    scheme: &PartitionScheme,
) -> RangeClassification {
    let thresholds = scheme.thresholds();
    let classes = scheme.class_count();
    let mut counts = alloc::vec![0; classes];
    let mut sums = alloc::vec![ExactSum::new(); classes];
    let mut labels = Vec::with_capacity(lt.range());
    for ((_, l), v) in lt.iter().zip(values) {
        let k = thresholds.iter().take_while(|&&th| th <= l as f64).count();
        let class = match k {
            0 => SiteClass::Down,
            k if k == thresholds.len() => SiteClass::Up,
            k => SiteClass::Level(k - 1),
        };
        let i = class.index(scheme.levels);
        counts[i] += 1;
        sums[i].add(l as f64 * v);
        labels.push(class);
    }
    RangeClassification { labels, counts, sums }
}

/// Classifies the range of `lt` and sums `l(x) eta(x)` per class.
pub fn classify(lt: &LocalTimeField, scenery: &mut SceneryField, scheme: &PartitionScheme) -> Result<RangeClassification> {
    check_length(lt, scheme)?;
    let values: Vec<f64> = lt.iter().map(|(s, _)| scenery.value(&s)).collect();
    Ok(classify_values(lt, values.into_iter(), scheme))
}

/// [`classify`] on a sample's cached scenery.
pub fn classify_sample(sample: &RwrsSample, scheme: &PartitionScheme) -> Result<RangeClassification> {
    check_length(&sample.local_times, scheme)?;
    Ok(classify_values(&sample.local_times, sample.scenery_values.iter().copied(), scheme))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    /// Whether `X_n > ny`; otherwise the check is vacuous.
    pub exceeded: bool,
    /// Classes whose event fired: a level sum above `n y_i`, the down sum
    /// above `n y_down`, or a nonempty up class.
    pub fired: Vec<SiteClass>,
}

impl DecompositionReport {
    /// `X_n > ny` with no class event firing.
    pub fn violated(&self) -> bool {
        self.exceeded && self.fired.is_empty()
    }
}

/// Verifies on one sample that `X_n > ny` implies one of the class events.
pub fn event_decomposition_check(sample: &RwrsSample, scheme: &PartitionScheme) -> Result<DecompositionReport> {
    let c = classify_sample(sample, scheme)?;
    let n = scheme.n as f64;
    let sums = c.class_sums();
    let exceeded = c.total() > n * scheme.y;
    let mut fired = Vec::new();
    if sums[0] > n * scheme.y_down {
        fired.push(SiteClass::Down);
    }
    for (i, &yi) in scheme.y_levels.iter().enumerate() {
        if sums[i + 1] > n * yi {
            fired.push(SiteClass::Level(i));
        }
    }
    if c.counts[scheme.levels + 2] > 0 {
        fired.push(SiteClass::Up);
    }
    Ok(DecompositionReport { exceeded, fired })
}

/// Monte Carlo estimate of `P(some site reaches (yn)^a visits by time n)`.
pub fn d_up_probability<E: Executor>(
    config: WalkConfig,
    scheme: &PartitionScheme,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<TailEstimate> {
    if !config.is_transient() {
        return Err(Error::RecurrentWalk(config.dim()));
    }
    if replicas == 0 {
        return Err(invalid("replicas must be positive"));
    }
    let threshold = scheme.up_threshold();
    let n = scheme.n as usize;
    if threshold > (n + 1) as f64 {
        return Ok(TailEstimate {
            replicas: replicas as u64,
            ..TailEstimate::exact(f64::NEG_INFINITY, EstimatorId::Naive, seed)
        });
    }
    let hits = exec.map(replicas, |i| {
        let mut walker = Walker::new(config, rng::stream(seed, tag::PATH, i as u64));
        let mut lt = LocalTimeField::new();
        fill_local_times(&mut walker, n, &mut lt);
        u64::from(lt.max_local_time() as f64 >= threshold)
    });
    Ok(TailEstimate::from_counts(hits.iter().sum(), replicas as u64, EstimatorId::Naive, seed))
}

/// `ln(n e^{-kappa0 (yn)^a})`, the envelope without its prefactor.
pub fn d_up_log_envelope(scheme: &PartitionScheme, kappa0: f64) -> f64 {
    log(scheme.n as f64) - kappa0 * scheme.up_threshold()
}

/// `sup_{lambda in grid} (y lambda - nu lambda^2 / 2)` and its maximizer;
/// `lambda = 0` is always admissible.
pub fn chebyshev_sup(y: f64, nu: f64, lambda_grid: &[f64]) -> (f64, f64) {
    lambda_grid
        .iter()
        .map(|&l| (y * l - nu * l * l / 2.0, l))
        .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownBound {
    /// `-(n^{1-b} / z) sup_lambda (y_down lambda - nu(delta) lambda^2 / 2)`,
    /// valid for every path.
    pub log_bound: f64,
    /// The same Chebyshev bound before `sum_{down} l^2 <= z n^{1+b}` is used:
    /// `-(n^{1-b}/z) (y_down lambda) + (lambda^2 nu / 2) sum_{down} l^2 / (z n^b)^2`,
    /// minimized over the grid. Bounds `P_eta(down sum > n y_down)` given `lt`.
    pub conditional_log_bound: f64,
    pub lambda: f64,
    pub delta: f64,
    pub nu: f64,
}

/// Chebyshev bound for the down-class sum exceeding `n y_down`.
///
/// Grid points must lie in `[0, delta]`.
pub fn d_down_chebyshev(
    lt: &LocalTimeField,
    dist: &SceneryDistribution,
    scheme: &PartitionScheme,
    delta: f64,
    lambda_grid: &[f64],
) -> Result<DownBound> {
    check_length(lt, scheme)?;
    if lambda_grid.iter().any(|&l| !(0.0..=delta).contains(&l)) {
        return Err(invalid("lambda grid must lie in [0, delta]"));
    }
    let nu = dist.moment_nu(delta)?;
    let n = scheme.n as f64;
    let b = scheme.b_exponent();
    let z = scheme.z_threshold;
    let scale = pow(n, 1.0 - b) / z;
    let (sup, lambda) = chebyshev_sup(scheme.y_down, nu, lambda_grid);

    let cut = z * pow(n, b);
    let sq: f64 = lt.iter().filter(|&(_, l)| (l as f64) < cut).map(|(_, l)| (l as f64) * (l as f64)).sum();
    let conditional = lambda_grid
        .iter()
        .map(|&l| -scale * scheme.y_down * l + l * l * nu / 2.0 * sq / (cut * cut))
        .fold(0.0, f64::min);
    Ok(DownBound {
        log_bound: -scale * sup,
        conditional_log_bound: conditional,
        lambda,
        delta,
        nu,
    })
}
