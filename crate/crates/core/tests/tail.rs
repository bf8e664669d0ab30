mod oracles;

use rwrs_core::scenery::SceneryDistribution;
use rwrs_core::tail::*;
use rwrs_core::walk::{LocalTimeField, ReturnLaw, Site, WalkConfig};
use rwrs_core::{EstimatorId, Sequential};

fn d3() -> WalkConfig {
    WalkConfig::simple(3).unwrap()
}

#[test]
fn naive_extremes() {
    let d = SceneryDistribution::new(2.0, 1.0).unwrap();
    let far = naive_tail(d3(), &d, 50, 1e6, 2000, 1, &Sequential).unwrap();
    assert_eq!(far.hits, 0);
    let half = naive_tail(d3(), &d, 50, 1e-12, 20_000, 1, &Sequential).unwrap();
    assert!((half.probability() - 0.5).abs() < 4.0 * half.std_error());
    assert_eq!(half.estimator, EstimatorId::Naive);
    assert!(naive_tail(d3(), &d, 50, 0.0, 10, 1, &Sequential).is_err());
}

#[test]
fn tilt_closed_forms() {
    let g = SceneryDistribution::new(2.0, 1.0).unwrap();
    let one = LocalTimeField::from_counts([(Site::ORIGIN, 1)]).unwrap();
    let two = LocalTimeField::from_counts([(Site::ORIGIN, 2)]).unwrap();
    for &t in &[0.5, 3.0, 40.0] {
        // Lambda'(lambda) = lambda / 2
        let l1 = tilting_parameter(&one, &g, t).unwrap().lambda;
        assert!((l1 - 2.0 * t).abs() < 1e-7 * t);
        // 2 Lambda'(2 lambda) = 2 lambda = 2t
        let l2 = tilting_parameter(&two, &g, 2.0 * t).unwrap().lambda;
        assert!((l2 - l1 / 2.0).abs() < 1e-7 * t);
    }
    let tiny = tilting_parameter(&one, &g, 1e-9).unwrap().lambda;
    assert!(tiny.abs() < 1e-8);
    assert!(matches!(
        tilting_parameter(&one, &g, 1e9),
        Err(rwrs_core::Error::TargetUnreachable { .. })
    ));
}

#[test]
fn tilted_weights_are_normalized() {
    let d = SceneryDistribution::new(1.5, 1.0).unwrap();
    let lt = rwrs_core::walk::local_times(&rwrs_core::walk::simulate_path(d3(), 300, 2));
    let m = tilted_weight_normalization(&lt, &d, 60.0, 200_000, 4).unwrap();
    assert!((m.mean - 1.0).abs() < 3.0 * m.std_error, "{m:?}");
}

#[test]
fn tilted_agrees_with_naive_where_both_resolve() {
    let d = SceneryDistribution::new(2.0, 1.0).unwrap();
    let (n, y) = (100, 0.3);
    let naive = naive_tail(d3(), &d, n, y, 100_000, 5, &Sequential).unwrap();
    assert!(naive.hits >= 50, "{naive:?}");
    let tilted = tilted_tail(d3(), &d, n, y, 20_000, 1, 6, &Sequential).unwrap();
    let joint = (naive.variance() + tilted.variance()).sqrt();
    assert!((naive.probability() - tilted.probability()).abs() < 3.0 * joint, "{naive:?} {tilted:?}");

    let higher = tilted_tail(d3(), &d, n, 2.0 * y, 20_000, 1, 6, &Sequential).unwrap();
    assert!(higher.log_probability < tilted.log_probability);
}

#[test]
fn unit_alpha_tilt_agrees_with_naive() {
    let d = SceneryDistribution::new(1.0, 1.0).unwrap();
    let (n, y) = (64, 0.5);
    let naive = naive_tail(d3(), &d, n, y, 100_000, 7, &Sequential).unwrap();
    assert!(naive.hits >= 50);
    let tilted = tilted_tail(d3(), &d, n, y, 20_000, 1, 8, &Sequential).unwrap();
    let joint = (naive.variance() + tilted.variance()).sqrt();
    assert!((naive.probability() - tilted.probability()).abs() < 3.0 * joint, "{naive:?} {tilted:?}");
}

#[test]
fn single_visit_bound_by_hand() {
    // k = 1: log P(H_0 <= n) + log P(eta > ny), Laplace tail e^{-t}/2
    let d = SceneryDistribution::new(1.0, 1.0).unwrap();
    let n = 20_000;
    let lb = lower_bound(d3(), &d, n, 0.001, Some(1)).unwrap();
    let p = oracles::return_probability_3d();
    let by_hand = p.ln() - n as f64 * 0.001 - 2f64.ln();
    // P(H_0 <= n) falls short of p by P(n < H_0 < inf) = O(n^{-1/2})
    assert!(lb.log_probability < by_hand && lb.log_probability > by_hand - 0.02, "{} vs {by_hand}", lb.log_probability);
    assert_eq!(lb.estimator, EstimatorId::LowerBound);
}

#[test]
fn bound_needs_a_nonempty_return_window() {
    let d = SceneryDistribution::new(1.0, 1.0).unwrap();
    // n/k = 1: the walk cannot be back in one step
    assert!(matches!(
        lower_bound(d3(), &d, 10, 1.0, Some(10)),
        Err(rwrs_core::Error::EmptyReturnWindow { .. })
    ));
}

#[test]
fn optimal_visit_count_is_near_prediction() {
    let d = SceneryDistribution::new(1.0, 1.0).unwrap();
    let (n, y) = (4096u64, 1.0);
    let predicted = (n as f64 * y).powf(d.a());
    let (k, values) = lower_bound_scan(d3(), &d, n, y, (3.0 * predicted) as u64).unwrap();
    assert!(k as f64 >= predicted / 2.0 && k as f64 <= 2.0 * predicted, "k = {k}, predicted {predicted}");
    assert_eq!(values.len(), (3.0 * predicted) as usize);
}

#[test]
fn bound_stays_below_estimate() {
    let d = SceneryDistribution::new(1.0, 1.0).unwrap();
    for &n in &[256usize, 1024] {
        let est = tilted_tail(d3(), &d, n, 1.0, 2000, 1, 3, &Sequential).unwrap();
        let lb = lower_bound(d3(), &d, n as u64, 1.0, None).unwrap();
        assert!(lb.log_probability <= est.log_probability + 3.0 * est.log_std_error());
    }
}

#[test]
fn exponent_fit_is_exact_on_pure_powers() {
    for &(c, a) in &[(1.0, 0.5), (2.0, 0.6)] {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0, 1e4].iter().map(|&s| (s, -c * s.powf(a))).collect();
        let fit = fit_exponent(&pts).unwrap();
        assert!((fit.slope - a).abs() < 1e-9);
        assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }
    assert!(fit_exponent(&[(1.0, -1.0), (2.0, -2.0)]).is_err());
    assert!(fit_exponent(&[(1.0, -1.0), (2.0, 0.0), (3.0, -3.0)]).is_err());
}

#[test]
fn exact_return_law_matches_lattice_integral() {
    let law = ReturnLaw::new(d3(), 1 << 16);
    assert!((law.return_prob() - oracles::return_probability_3d()).abs() < 1e-4);
}
