use rwrs_core::math::mean_and_se;
use rwrs_core::rwrs::*;
use rwrs_core::scenery::{SceneryDistribution, SceneryField};
use rwrs_core::walk::{LocalTimeField, Site, WalkConfig};
use rwrs_core::Sequential;

#[test]
fn weighted_sum_is_linear_in_scenery() {
    let s = |x| Site::from_coords(&[x]);
    let lt = LocalTimeField::from_counts([(s(0), 3), (s(1), 1), (s(-1), 5)]).unwrap();
    let vals = [(s(0), 0.25), (s(1), -1.5), (s(-1), 0.125)];
    let x = evaluate_x(&lt, &mut SceneryField::fixed(vals));
    let x3 = evaluate_x(&lt, &mut SceneryField::fixed(vals.map(|(k, v)| (k, 3.0 * v))));
    assert_eq!(x, -0.125);
    assert_eq!(x3, 3.0 * x);
}

#[test]
fn samples_are_reproducible_and_consistent() {
    let d = SceneryDistribution::new(1.5, 1.0).unwrap();
    let cfg = WalkConfig::simple(3).unwrap();
    let a = sample_rwrs(cfg, &d, 2000, 11);
    let b = sample_rwrs(cfg, &d, 2000, 11);
    assert_eq!(a.x_n.to_bits(), b.x_n.to_bits());
    assert_eq!(a.local_times.total_visits(), 2001);
    assert_eq!(a.scenery_values.len(), a.local_times.range());
    let direct: f64 = rwrs_core::math::exact_sum(
        a.local_times.iter().zip(&a.scenery_values).map(|((_, l), v)| l as f64 * v),
    );
    assert_eq!(direct, a.x_n);
}

#[test]
fn sum_is_centered_and_symmetric() {
    let d = SceneryDistribution::new(1.0, 1.0).unwrap();
    let cfg = WalkConfig::simple(2).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|i| sample_rwrs_replica(cfg, &d, 200, 3, i).x_n).collect();
    let (m, se) = mean_and_se(&xs);
    assert!(m.abs() < 4.0 * se);
    // 1.63 is the 1% two-sample Kolmogorov-Smirnov critical value
    assert!(symmetry_statistic(&xs) < 1.63);
}

fn ratios(dim: usize, power: f64, seed: u64) -> Vec<f64> {
    let d = SceneryDistribution::new(2.0, 1.0).unwrap();
    let cfg = WalkConfig::simple(dim).unwrap();
    [1000usize, 4000, 16_000]
        .iter()
        .map(|&n| {
            let m = second_moment(cfg, &d, n, 2000, seed, &Sequential).unwrap();
            assert!(m.decoupling_z() < 3.0, "d = {dim}, n = {n}: {m:?}");
            m.direct.mean / (n as f64).powf(power)
        })
        .collect()
}

#[test]
fn mean_square_grows_like_n_three_halves_in_one_dimension() {
    let r = ratios(1, 1.5, 1);
    let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0_f64), |a, &v| (a.0.min(v), a.1.max(v)));
    assert!(hi / lo <= 1.5, "{r:?}");
}

#[test]
fn mean_square_grows_linearly_in_three_dimensions() {
    let r = ratios(3, 1.0, 2);
    let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0_f64), |a, &v| (a.0.min(v), a.1.max(v)));
    assert!(hi / lo <= 1.5, "{r:?}");
}
