//! One function per subcommand: parameters in, table and summary out.

use rand::Rng;
use rwrs_core::bellshape::{
    convolve, is_bell_shaped, symmetric_sum_identity_check, weighted_tail, weighted_tail_paired, GridDensity, TailMethod,
};
use rwrs_core::math::{erfc, log, pow};
use rwrs_core::partition::{build_scheme, event_decomposition_check, classify_sample, PartitionScheme, SiteClass};
use rwrs_core::rwrs::{sample_rwrs_replica, second_moment};
use rwrs_core::scenery::SceneryDistribution;
use rwrs_core::tail::{fit_exponent, lower_bound, lower_bound_scan, naive_tail, origin_local_time, tilted_tail};
use rwrs_core::walk::{localization_fit, IncrementLaw, WalkConfig};
use rwrs_core::{rng, Error, Executor, TailEstimate};

use crate::error::{usage, Result};
use crate::format::{float_text, Table};

/// Stream tag for the random cases drawn by the bell-shape verifier.
const VERIFY_TAG: u64 = 0x5645_5249;

/// Naive estimates with at least this many hits are trusted by `auto`.
pub const AUTO_MIN_HITS: u64 = 50;

pub struct Report {
    pub table: Table,
    pub summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub dim: usize,
    pub law: IncrementLaw,
    pub alpha: f64,
    pub c: f64,
}

impl Model {
    pub fn walk(&self) -> Result<WalkConfig> {
        Ok(WalkConfig::new(self.dim, self.law)?)
    }

    pub fn scenery(&self) -> Result<SceneryDistribution> {
        Ok(SceneryDistribution::new(self.alpha, self.c)?)
    }

    /// `1 <= alpha < d/2`, where the speed exponent is `alpha / (alpha + 1)`.
    pub fn require_regime(&self) -> Result<()> {
        if self.alpha >= 1.0 && self.alpha < self.dim as f64 / 2.0 {
            Ok(())
        } else {
            Err(Error::RegimeViolation {
                alpha: self.alpha,
                dim: self.dim,
            }
            .into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailChoice {
    Naive,
    Tilted,
    /// Naive if it reaches [`AUTO_MIN_HITS`], tilted otherwise.
    Auto,
}

impl std::str::FromStr for TailChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(TailChoice::Naive),
            "tilted" => Ok(TailChoice::Tilted),
            "auto" => Ok(TailChoice::Auto),
            _ => Err(format!("unknown estimator {s:?} (expected naive, tilted or auto)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailParams {
    pub model: Model,
    pub ns: Vec<usize>,
    pub y: f64,
    pub replicas: usize,
    pub inner: usize,
    pub estimator: TailChoice,
    pub seed: u64,
}

fn check_positive(value: usize, name: &str) -> Result<()> {
    if value == 0 {
        Err(usage(format!("--{name} must be positive")))
    } else {
        Ok(())
    }
}

fn estimate_tail<E: Executor>(p: &TailParams, n: usize, exec: &E) -> Result<TailEstimate> {
    let (walk, dist) = (p.model.walk()?, p.model.scenery()?);
    let tilted = || tilted_tail(walk, &dist, n, p.y, p.replicas, p.inner, p.seed, exec);
    Ok(match p.estimator {
        TailChoice::Naive => naive_tail(walk, &dist, n, p.y, p.replicas, p.seed, exec)?,
        TailChoice::Tilted => tilted()?,
        TailChoice::Auto => {
            let naive = naive_tail(walk, &dist, n, p.y, p.replicas, p.seed, exec)?;
            if naive.hits >= AUTO_MIN_HITS {
                naive
            } else {
                tilted()?
            }
        }
    })
}

pub const TAIL_COLUMNS: [&str; 10] = ["n", "y", "log_p", "p", "rel_se", "hits", "inner", "replicas", "seed", "estimator_id"];

pub fn tail<E: Executor>(p: &TailParams, exec: &E) -> Result<Report> {
    check_positive(p.replicas, "replicas")?;
    check_positive(p.inner, "inner")?;
    let mut table = Table::new(&TAIL_COLUMNS);
    let mut parts = Vec::new();
    for &n in &p.ns {
        let est = estimate_tail(p, n, exec)?;
        let inner = if est.estimator == rwrs_core::EstimatorId::Tilted { p.inner } else { 1 };
        table.push(vec![
            n.into(),
            p.y.into(),
            est.log_probability.into(),
            est.probability().into(),
            est.log_std_error().into(),
            est.hits.into(),
            inner.into(),
            est.replicas.into(),
            p.seed.into(),
            est.estimator.as_str().into(),
        ]);
        parts.push(format!("n={n} log_p={} ({})", float_text(est.log_probability), est.estimator.as_str()));
    }
    Ok(Report {
        table,
        summary: format!("tail: {}", parts.join("; ")),
    })
}

pub const EXPONENT_COLUMNS: [&str; 12] = [
    "n",
    "y",
    "ny",
    "log_p",
    "log_neg_log_p",
    "rel_se",
    "hits",
    "slope",
    "intercept",
    "replicas",
    "seed",
    "estimator_id",
];

/// Estimates `P(X_n >= ny)` for each `n` and fits `log(-log P)` against `log(ny)`.
pub fn exponent<E: Executor>(p: &TailParams, exec: &E) -> Result<(Report, Vec<TailEstimate>, f64)> {
    p.model.require_regime()?;
    check_positive(p.replicas, "replicas")?;
    check_positive(p.inner, "inner")?;
    if p.ns.len() < 3 {
        return Err(usage("--n needs at least three values for a fit"));
    }
    let estimates = p.ns.iter().map(|&n| estimate_tail(p, n, exec)).collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = p
        .ns
        .iter()
        .zip(&estimates)
        .filter(|(_, e)| e.log_probability.is_finite() && e.log_probability < 0.0)
        .map(|(&n, e)| (n as f64 * p.y, e.log_probability))
        .collect();
    if points.len() < 3 {
        return Err(Error::DegenerateProbability(0.0).into());
    }
    let fit = fit_exponent(&points)?;
    let mut table = Table::new(&EXPONENT_COLUMNS);
    for (&n, e) in p.ns.iter().zip(&estimates) {
        let ny = n as f64 * p.y;
        let lnl = if e.log_probability < 0.0 { log(-e.log_probability) } else { f64::NAN };
        table.push(vec![
            n.into(),
            p.y.into(),
            ny.into(),
            e.log_probability.into(),
            lnl.into(),
            e.log_std_error().into(),
            e.hits.into(),
            fit.slope.into(),
            fit.intercept.into(),
            e.replicas.into(),
            p.seed.into(),
            e.estimator.as_str().into(),
        ]);
    }
    let target = p.model.alpha / (p.model.alpha + 1.0);
    let summary = format!(
        "exponent: slope {} (alpha/(alpha+1) = {}) from {} points",
        float_text(fit.slope),
        float_text(target),
        points.len()
    );
    Ok((Report { table, summary }, estimates, fit.slope))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateParams {
    pub model: Model,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
}

pub const SIMULATE_COLUMNS: [&str; 10] = [
    "replica",
    "n",
    "x_n",
    "range",
    "max_local_time",
    "origin_local_time",
    "self_intersection",
    "replicas",
    "seed",
    "estimator_id",
];

pub fn simulate<E: Executor>(p: &SimulateParams, exec: &E) -> Result<Report> {
    check_positive(p.replicas, "replicas")?;
    let (walk, dist) = (p.model.walk()?, p.model.scenery()?);
    let rows = exec.map(p.replicas, |i| {
        let s = sample_rwrs_replica(walk, &dist, p.n, p.seed, i as u64);
        let lt = &s.local_times;
        (s.x_n, lt.range(), lt.max_local_time(), origin_local_time(lt), lt.self_intersection())
    });
    let mut table = Table::new(&SIMULATE_COLUMNS);
    for (i, r) in rows.iter().enumerate() {
        table.push(vec![
            i.into(),
            p.n.into(),
            r.0.into(),
            r.1.into(),
            r.2.into(),
            r.3.into(),
            r.4.into(),
            p.replicas.into(),
            p.seed.into(),
            "sample".into(),
        ]);
    }
    let mean_range = rows.iter().map(|r| r.1 as f64).sum::<f64>() / rows.len() as f64;
    Ok(Report {
        table,
        summary: format!("simulate: {} samples of n={}, mean range {}", p.replicas, p.n, float_text(mean_range)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentParams {
    pub model: Model,
    pub ns: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
}

pub const MOMENT_COLUMNS: [&str; 12] = [
    "d",
    "n",
    "mean_sq",
    "mean_sq_se",
    "decoupled",
    "decoupled_se",
    "decoupling_z",
    "normalizer",
    "ratio",
    "replicas",
    "seed",
    "estimator_id",
];

/// Growth of `E[X_n^2]`: `n^{3/2}` in d = 1, `n log n` in d = 2, `n` above.
pub fn moment_normalizer(dim: usize, n: usize) -> f64 {
    let n = n as f64;
    match dim {
        1 => pow(n, 1.5),
        2 => n * log(n),
        _ => n,
    }
}

pub fn moments<E: Executor>(p: &MomentParams, exec: &E) -> Result<Report> {
    let (walk, dist) = (p.model.walk()?, p.model.scenery()?);
    let mut table = Table::new(&MOMENT_COLUMNS);
    let mut ratios = Vec::new();
    for &n in &p.ns {
        let m = second_moment(walk, &dist, n, p.replicas, p.seed, exec)?;
        let norm = moment_normalizer(p.model.dim, n);
        ratios.push(m.direct.mean / norm);
        table.push(vec![
            p.model.dim.into(),
            n.into(),
            m.direct.mean.into(),
            m.direct.std_error.into(),
            m.decoupled.mean.into(),
            m.decoupled.std_error.into(),
            m.decoupling_z().into(),
            norm.into(),
            (m.direct.mean / norm).into(),
            p.replicas.into(),
            p.seed.into(),
            "moment".into(),
        ]);
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |a, &r| (a.0.min(r), a.1.max(r)));
    Ok(Report {
        table,
        summary: format!("moments: ratio spread max/min = {}", float_text(hi / lo)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationParams {
    pub dim: usize,
    pub sides: Vec<u32>,
    pub replicas: Vec<usize>,
    pub horizon: u64,
    pub min_hits: u64,
    pub seed: u64,
}

pub const LOCALIZATION_COLUMNS: [&str; 11] = [
    "side",
    "volume",
    "t",
    "scaled_t",
    "exceedances",
    "neg_log_p",
    "slope",
    "intercept",
    "replicas",
    "seed",
    "estimator_id",
];

/// Fits the sojourn-time decay for each box side; `replicas` holds one count
/// per side or a single count for all.
pub fn localization<E: Executor>(p: &LocalizationParams, exec: &E) -> Result<(Report, Vec<f64>)> {
    if p.replicas.len() != 1 && p.replicas.len() != p.sides.len() {
        return Err(usage("--replicas takes one value or one per side"));
    }
    let walk = WalkConfig::simple(p.dim)?;
    let mut table = Table::new(&LOCALIZATION_COLUMNS);
    let mut slopes = Vec::new();
    for (j, &side) in p.sides.iter().enumerate() {
        let reps = p.replicas[j.min(p.replicas.len() - 1)];
        check_positive(reps, "replicas")?;
        let fit = localization_fit(walk, side, reps, p.horizon, p.min_hits, p.seed, exec)?;
        let scale = pow(fit.volume as f64, 2.0 / p.dim as f64);
        for &(t, k, y) in &fit.points {
            table.push(vec![
                side.into(),
                fit.volume.into(),
                t.into(),
                (t as f64 / scale).into(),
                k.into(),
                y.into(),
                fit.slope.into(),
                fit.intercept.into(),
                reps.into(),
                p.seed.into(),
                "naive".into(),
            ]);
        }
        slopes.push(fit.slope);
    }
    let (lo, hi) = slopes.iter().fold((f64::INFINITY, 0.0_f64), |a, &s| (a.0.min(s), a.1.max(s)));
    let listed: Vec<String> = slopes.iter().map(|&s| float_text(s)).collect();
    Ok((
        Report {
            table,
            summary: format!("localization: slopes [{}], max/min {}", listed.join(", "), float_text(hi / lo)),
        },
        slopes,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionParams {
    pub model: Model,
    pub n: u64,
    pub y: f64,
    pub z_threshold: f64,
    pub chi_range: (f64, f64),
    pub samples: usize,
    pub seed: u64,
}

pub const PARTITION_COLUMNS: [&str; 11] = [
    "class",
    "lower_threshold",
    "upper_threshold",
    "budget",
    "gamma",
    "mean_sites",
    "mean_sum",
    "fired",
    "replicas",
    "seed",
    "estimator_id",
];

fn class_name(c: SiteClass) -> String {
    match c {
        SiteClass::Down => "down".to_owned(),
        SiteClass::Level(i) => format!("level-{i}"),
        SiteClass::Up => "up".to_owned(),
    }
}

/// Outcome of classifying simulated samples with a scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionRun {
    pub scheme: PartitionScheme,
    pub exceeded: usize,
    pub violations: usize,
    /// Samples whose class sums did not add back to `x_n` exactly.
    pub mismatches: usize,
}

pub fn partition<E: Executor>(p: &PartitionParams, exec: &E) -> Result<(Report, PartitionRun)> {
    let scheme = build_scheme(p.model.alpha, p.model.dim, p.n, p.y, p.z_threshold, p.chi_range)?;
    let (walk, dist) = (p.model.walk()?, p.model.scenery()?);
    let classes = scheme.class_count();
    let n = usize::try_from(p.n).map_err(|_| usage("--n too large to simulate"))?;
    let per_sample = exec.map(p.samples, |i| -> rwrs_core::Result<_> {
        let s = sample_rwrs_replica(walk, &dist, n, p.seed, i as u64);
        let c = classify_sample(&s, &scheme)?;
        let r = event_decomposition_check(&s, &scheme)?;
        Ok((c.counts.clone(), c.class_sums(), c.total() == s.x_n, r))
    });
    let mut sites = vec![0.0; classes];
    let mut sums = vec![0.0; classes];
    let mut fired = vec![0usize; classes];
    let (mut exceeded, mut violations, mut mismatches) = (0, 0, 0);
    for out in per_sample {
        let (counts, class_sums, exact, report) = out?;
        for k in 0..classes {
            sites[k] += counts[k] as f64;
            sums[k] += class_sums[k];
        }
        for c in &report.fired {
            fired[c.index(scheme.levels)] += 1;
        }
        exceeded += usize::from(report.exceeded);
        violations += usize::from(report.violated());
        mismatches += usize::from(!exact);
    }
    let m = p.samples.max(1) as f64;
    let t = scheme.thresholds();
    let mut table = Table::new(&PARTITION_COLUMNS);
    for k in 0..classes {
        let class = match k {
            0 => SiteClass::Down,
            k if k == classes - 1 => SiteClass::Up,
            k => SiteClass::Level(k - 1),
        };
        let (lower, upper) = match k {
            0 => (0.0, t[0]),
            k if k == classes - 1 => (t[k - 1], f64::INFINITY),
            k => (t[k - 1], t[k]),
        };
        let (budget, gamma) = match class {
            SiteClass::Down => (scheme.y_down, f64::NAN),
            SiteClass::Up => (scheme.y_up, f64::NAN),
            SiteClass::Level(i) => (scheme.y_levels[i], scheme.gamma[i]),
        };
        table.push(vec![
            class_name(class).into(),
            lower.into(),
            upper.into(),
            budget.into(),
            gamma.into(),
            (sites[k] / m).into(),
            (sums[k] / m).into(),
            fired[k].into(),
            p.samples.into(),
            p.seed.into(),
            "scheme".into(),
        ]);
    }
    let summary = format!(
        "partition: N={} chi={} beta={}; {} of {} samples exceeded ny, {} decomposition violations, {} sum mismatches",
        scheme.levels,
        float_text(scheme.chi),
        float_text(scheme.beta),
        exceeded,
        p.samples,
        violations,
        mismatches
    );
    let run = PartitionRun {
        scheme,
        exceeded,
        violations,
        mismatches,
    };
    Ok((Report { table, summary }, run))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellshapeParams {
    pub pairs: usize,
    pub monotone_cases: usize,
    pub spacing: f64,
    pub replicas: usize,
    pub seed: u64,
}

pub const BELLSHAPE_COLUMNS: [&str; 8] = ["check", "case", "statistic", "tolerance", "pass", "replicas", "seed", "estimator_id"];

/// Closure tolerance per adjacent node pair.
pub const CLOSURE_TOL: f64 = 1e-9;
pub const IDENTITY_TOL: f64 = 1e-5;
pub const GAUSSIAN_IDENTITY_TOL: f64 = 1e-6;

fn random_law<R: Rng>(r: &mut R) -> Result<SceneryDistribution> {
    Ok(SceneryDistribution::new(r.random_range(1.0..3.0), r.random_range(0.5..2.0))?)
}

/// Convolution closure on random pairs, coefficient monotonicity under common
/// random numbers, and the symmetric-sum identity.
pub fn bellshape_verify<E: Executor>(p: &BellshapeParams, exec: &E) -> Result<(Report, usize)> {
    if !(p.spacing > 0.0) {
        return Err(usage("--spacing must be positive"));
    }
    check_positive(p.replicas.saturating_sub(1), "replicas (at least 2)")?;
    let mut table = Table::new(&BELLSHAPE_COLUMNS);
    let mut failures = 0;
    let mut row = |table: &mut Table, check: &str, case: usize, stat: f64, tol: f64, pass: bool, reps: usize, id: &str| {
        failures += usize::from(!pass);
        table.push(vec![
            check.into(),
            case.into(),
            stat.into(),
            tol.into(),
            pass.into(),
            reps.into(),
            p.seed.into(),
            id.into(),
        ]);
    };

    let mut r = rng::stream(p.seed, VERIFY_TAG, 0);
    for case in 0..p.pairs {
        let (d1, d2) = (random_law(&mut r)?, random_law(&mut r)?);
        let f = GridDensity::scaled_scenery(&d1, r.random_range(0.2..2.0), p.spacing)?;
        let g = GridDensity::scaled_scenery(&d2, r.random_range(0.2..2.0), p.spacing)?;
        let excess = match is_bell_shaped(&convolve(&f, &g)?, CLOSURE_TOL) {
            Ok(()) => 0.0,
            Err(v) => v.excess,
        };
        row(&mut table, "closure", case, excess, CLOSURE_TOL, excess == 0.0, 0, "grid");
    }

    let mut r = rng::stream(p.seed, VERIFY_TAG, 1);
    for case in 0..p.monotone_cases {
        let dist = random_law(&mut r)?;
        let len = r.random_range(1..=8);
        let small: Vec<f64> = (0..len).map(|_| r.random_range(0.2..2.0)).collect();
        let large: Vec<f64> = small.iter().map(|&a| a * r.random_range(1.0..1.5)).collect();
        let y = r.random_range(0.5..3.0);
        let paired = weighted_tail_paired(&small, &large, &dist, y, p.replicas, p.seed.wrapping_add(case as u64), exec)?;
        // tail(small) <= tail(large) + 2 joint sigma
        let z = if paired.difference_se > 0.0 { paired.difference / paired.difference_se } else { 0.0 };
        let pass = paired.difference >= -2.0 * paired.difference_se;
        row(&mut table, "monotone", case, z, -2.0, pass, p.replicas, "mc");
    }

    let stretched = SceneryDistribution::new(1.5, 1.0)?;
    let f = GridDensity::scaled_scenery(&stretched, 1.0, p.spacing / 5.0)?;
    let g = GridDensity::scaled_scenery(&stretched, 0.5, p.spacing / 5.0)?;
    for (case, &y) in [0.5, 1.0, 2.0].iter().enumerate() {
        let rep = symmetric_sum_identity_check(&f, &g, y)?;
        row(&mut table, "identity", case, rep.residual.abs(), IDENTITY_TOL, rep.residual.abs() < IDENTITY_TOL, 0, "grid");
    }
    let gauss = SceneryDistribution::new(2.0, 1.0)?;
    let f = GridDensity::scaled_scenery(&gauss, 1.0, p.spacing / 5.0)?;
    let g = GridDensity::scaled_scenery(&gauss, 0.7, p.spacing / 5.0)?;
    let rep = symmetric_sum_identity_check(&f, &g, 1.0)?;
    let pass = rep.residual.abs() < GAUSSIAN_IDENTITY_TOL;
    row(&mut table, "identity-gaussian", 0, rep.residual.abs(), GAUSSIAN_IDENTITY_TOL, pass, 0, "grid");

    // four unit coefficients: N(0, 2) beyond 2
    let grid = weighted_tail(&[1.0; 4], &gauss, 2.0, TailMethod::Grid { bins: 1024 }, exec)?;
    let want = 0.5 * erfc(1.0);
    let err = (grid.probability - want).abs();
    row(&mut table, "gaussian-sum-tail", 0, err, 1e-5, err < 1e-5, 0, "grid");

    let summary = format!("bellshape-verify: {} checks, {} failures", table.rows().len(), failures);
    Ok((Report { table, summary }, failures))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundParams {
    pub model: Model,
    pub ns: Vec<u64>,
    pub y: f64,
    pub k: Option<u64>,
    pub seed: u64,
}

pub const LOWER_BOUND_COLUMNS: [&str; 10] = [
    "n",
    "y",
    "k",
    "k_predicted",
    "log_bound",
    "argmax_k",
    "max_log_bound",
    "replicas",
    "seed",
    "estimator_id",
];

/// The single-site bound at `k` (default `floor((ny)^a)`) and its maximizer
/// over `k <= 3 (ny)^a`.
pub fn lower_bounds(p: &LowerBoundParams) -> Result<Report> {
    let (walk, dist) = (p.model.walk()?, p.model.scenery()?);
    if !walk.is_transient() {
        return Err(Error::RecurrentWalk(p.model.dim).into());
    }
    let mut table = Table::new(&LOWER_BOUND_COLUMNS);
    let mut parts = Vec::new();
    for &n in &p.ns {
        let predicted = pow(n as f64 * p.y, dist.a());
        let k = p.k.unwrap_or_else(|| (predicted.floor() as u64).max(1));
        let bound = lower_bound(walk, &dist, n, p.y, Some(k))?;
        let k_max = ((3.0 * predicted).ceil() as u64).clamp(3, n.max(3));
        let (best, values) = lower_bound_scan(walk, &dist, n, p.y, k_max)?;
        table.push(vec![
            n.into(),
            p.y.into(),
            k.into(),
            predicted.into(),
            bound.log_probability.into(),
            best.into(),
            values[best as usize - 1].into(),
            0u64.into(),
            p.seed.into(),
            "lower-bound".into(),
        ]);
        parts.push(format!("n={n} argmax_k={best} (ny)^a={}", float_text(predicted)));
    }
    Ok(Report {
        table,
        summary: format!("lower-bound: {}", parts.join("; ")),
    })
}
