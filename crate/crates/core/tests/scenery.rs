mod oracles;

use rwrs_core::math::mean_and_se;
use rwrs_core::scenery::{SceneryDistribution, SceneryField};
use rwrs_core::walk::Site;
use rwrs_core::Error;

fn dist(alpha: f64, c: f64) -> SceneryDistribution {
    SceneryDistribution::new(alpha, c).unwrap()
}

#[test]
fn derived_exponents() {
    let d = dist(2.0, 1.0);
    assert_eq!((d.a(), d.b(), d.dual()), (2.0 / 3.0, 1.0 / 3.0, 2.0));
    assert_eq!(dist(1.0, 1.0).dual(), f64::INFINITY);
    assert!(SceneryDistribution::new(0.9, 1.0).is_err());
    assert!(SceneryDistribution::new(1.5, 0.0).is_err());
}

#[test]
fn gaussian_draws_have_half_variance() {
    let s = dist(2.0, 1.0).sample(1_000_000, 42);
    let (m, se) = mean_and_se(&s);
    assert!(m.abs() < 4.0 * se);
    let var = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
    assert!((var - 0.5).abs() < 0.002, "{var}");
}

#[test]
fn laplace_draws_match_exponential_tail() {
    let s = dist(1.0, 1.0).sample(1_000_000, 43);
    let frac = s.iter().filter(|v| v.abs() > 3.0).count() as f64 / s.len() as f64;
    let want = (-3.0f64).exp();
    let se = (want * (1.0 - want) / s.len() as f64).sqrt();
    assert!((frac - want).abs() < 4.0 * se, "{frac} vs {want}");
}

#[test]
fn sampler_agrees_with_tail_function() {
    for &alpha in &[1.0, 1.5, 2.0, 3.0] {
        let d = dist(alpha, 1.3);
        let s = d.sample(1_000_000, 7);
        for &t in &[1.0, 2.0, 3.0] {
            let p = d.log_tail(t).unwrap().exp();
            let frac = s.iter().filter(|&&v| v > t).count() as f64 / s.len() as f64;
            let se = (p * (1.0 - p) / s.len() as f64).sqrt();
            assert!((frac - p).abs() < 4.0 * se + 1e-7, "alpha {alpha} t {t}: {frac} vs {p}");
        }
    }
}

#[test]
fn tail_values() {
    let lap = dist(1.0, 1.0);
    assert!((lap.log_tail(5.0).unwrap() - (-5.0 - 2f64.ln())).abs() < 1e-12);
    for &alpha in &[1.0, 1.5, 2.0] {
        assert!((dist(alpha, 2.0).log_tail(1e-12).unwrap() + 2f64.ln()).abs() < 1e-9);
    }
    let g = dist(2.0, 1.0);
    // eta ~ N(0, 1/2), so P(eta > t) = P(Z > t sqrt 2)
    for &t in &[0.3, 1.0, 4.0] {
        let want = oracles::normal_tail(t * 2f64.sqrt()).ln();
        assert!((g.log_tail(t).unwrap() - want).abs() < 1e-10);
    }
    let d = dist(1.5, 1.0);
    let ratio = d.log_tail(20.0).unwrap() / -(20f64.powf(1.5));
    assert!((ratio - 1.0).abs() < 0.1);
    assert!(d.log_tail(0.0).is_err() && d.log_tail(-1.0).is_err());
}

#[test]
fn density_integrates_to_one() {
    for &(alpha, c) in &[(1.0, 1.0), (1.25, 0.5), (2.0, 1.0), (3.5, 2.0)] {
        let z = dist(alpha, c).normalization().unwrap();
        assert!((z - 1.0).abs() < 1e-9, "alpha {alpha}: {z}");
    }
}

#[test]
fn log_mgf_gaussian_and_symmetry() {
    let g = dist(2.0, 1.0);
    assert_eq!(g.log_mgf(0.0).unwrap(), 0.0);
    for &l in &[0.5, 1.0, 2.0] {
        assert!((g.log_mgf(l).unwrap() - l * l / 4.0).abs() < 1e-6);
    }
    let d = dist(1.5, 1.0);
    for &l in &[0.3, 2.0, 9.0] {
        let (a, b) = (d.log_mgf(l).unwrap(), d.log_mgf(-l).unwrap());
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
    let lap = dist(1.0, 1.0);
    assert!(matches!(lap.log_mgf(1.0), Err(Error::MgfDiverges { .. })));
    // Laplace(1): E e^{lambda eta} = 1 / (1 - lambda^2)
    assert!((lap.log_mgf(0.5).unwrap() + (0.75f64).ln()).abs() < 1e-9);
}

#[test]
fn log_mgf_is_convex() {
    let d = dist(1.5, 1.0);
    let grid: Vec<f64> = (0..12).map(|i| -6.0 + i as f64 * 1.1).collect();
    for &a in &grid {
        for &b in &grid {
            let mid = d.log_mgf((a + b) / 2.0).unwrap();
            let avg = (d.log_mgf(a).unwrap() + d.log_mgf(b).unwrap()) / 2.0;
            assert!(mid <= avg + 1e-9);
        }
    }
}

#[test]
fn kasahara_asymptote() {
    let g = dist(2.0, 1.0);
    for &x in &[0.5, 3.0, 10.0] {
        assert!((g.kasahara_asymptote(x).unwrap() - x * x / 4.0).abs() < 1e-12 * x * x);
    }
    let d = dist(1.5, 1.0);
    let r = d.log_mgf(30.0).unwrap() / d.kasahara_asymptote(30.0).unwrap();
    assert!((0.9..=1.1).contains(&r), "{r}");
    let scale = d.kasahara_asymptote(8.0).unwrap() / d.kasahara_asymptote(4.0).unwrap();
    assert!((scale - 2f64.powf(d.dual())).abs() < 1e-12);
    assert!(dist(1.0, 1.0).kasahara_asymptote(2.0).is_err());
}

#[test]
fn weighted_second_moment() {
    assert!((dist(2.0, 1.0).moment_nu(0.0).unwrap() - 0.5).abs() < 1e-9);
    assert!((dist(1.0, 1.0).moment_nu(0.0).unwrap() - 2.0).abs() < 1e-9);
    // Laplace(1): E[eta^2 e^{delta |eta|}] = 2 / (1 - delta)^3
    assert!((dist(1.0, 1.0).moment_nu(0.5).unwrap() - 16.0).abs() < 1e-8);
    assert!(dist(1.0, 1.0).moment_nu(1.0).is_err());
    let d = dist(1.5, 1.0);
    let nus: Vec<f64> = (0..8).map(|i| d.moment_nu(i as f64 * 0.5).unwrap()).collect();
    assert!(nus.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn scenery_field_is_consistent() {
    let d = dist(1.5, 1.0);
    let mut f = SceneryField::keyed(d.clone(), 5);
    let s = Site::from_coords(&[3, -1, 2]);
    let v = f.value(&s);
    assert_eq!(f.value(&s), v);
    assert_eq!(SceneryField::keyed(d, 5).value(&s), v);
    let mut fixed = SceneryField::fixed([(s, 1.5)]);
    assert_eq!(fixed.value(&s), 1.5);
    assert_eq!(fixed.value(&Site::ORIGIN), 0.0);
}
