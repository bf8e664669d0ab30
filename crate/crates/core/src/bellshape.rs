//! Densities sampled on uniform symmetric grids, with the operations needed
//! to check that bell shape survives convolution and that tails of weighted
//! sums grow with the weights.
//!
//! Grids are node-centered: `bins + 1` nodes `t_j = -W + j h`, `h = 2W / bins`,
//! with `bins` even so that `t = 0` is a node. Between nodes the density is
//! linear; `mass` and `tail` integrate that interpolant exactly.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{ceil, floor, log, ExactSum};
use crate::quad::integrate_pieces;
use crate::rng::{self, tag, Executor};
use crate::scenery::SceneryDistribution;

/// Tail mass allowed outside an automatically sized grid.
pub const TRUNCATION_MASS: f64 = 1e-8;
/// Largest coefficient count accepted by the grid method.
pub const MAX_GRID_COEFFICIENTS: usize = 32;
const MAX_NODES: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    half_width: f64,
    bins: usize,
    values: Vec<f64>,
}

impl GridDensity {
    /// `values` holds the density at the `bins + 1` nodes.
    pub fn new(half_width: f64, bins: usize, values: Vec<f64>) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("half width must be positive"));
        }
        if bins == 0 || bins % 2 != 0 {
            return Err(invalid("bin count must be even and positive"));
        }
        if values.len() != bins + 1 {
            return Err(invalid("a grid needs bins + 1 node values"));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("density values must be finite and nonnegative"));
        }
        Ok(GridDensity {
            half_width,
            bins,
            values,
        })
    }

    pub fn from_fn(half_width: f64, bins: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 2.0 * half_width / bins as f64;
        let values = (0..=bins).map(|j| f(-half_width + j as f64 * h)).collect();
        Self::new(half_width, bins, values)
    }

    /// The scenery density on `[-W, W]` with `W` leaving less than
    /// [`TRUNCATION_MASS`] outside.
    pub fn scenery(dist: &SceneryDistribution, bins: usize) -> Result<Self> {
        let w = truncation_width(dist, TRUNCATION_MASS);
        Self::from_fn(w, bins, |t| dist.density(t))
    }

    /// Density of `coeff * eta` on a grid of spacing `h`, wide enough to keep
    /// all but [`TRUNCATION_MASS`].
    pub fn scaled_scenery(dist: &SceneryDistribution, coeff: f64, h: f64) -> Result<Self> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(invalid("coefficients must be positive"));
        }
        let half_bins = ceil(coeff * truncation_width(dist, TRUNCATION_MASS) / h) as usize;
        if 2 * half_bins + 1 > MAX_NODES {
            return Err(invalid("grid too fine for this coefficient"));
        }
        let half_bins = half_bins.max(1);
        Self::from_fn(half_bins as f64 * h, 2 * half_bins, |t| dist.density(t / coeff) / coeff)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.bins as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Trapezoid integral of the node values.
    pub fn mass(&self) -> f64 {
        let inner: f64 = self.values[1..self.bins].iter().sum();
        self.spacing() * (inner + 0.5 * (self.values[0] + self.values[self.bins]))
    }

    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if !(t >= -self.half_width && t <= self.half_width) {
            return None;
        }
        let h = self.spacing();
        let j = (floor((t + self.half_width) / h) as usize).min(self.bins - 1);
        Some((j, t - self.node(j)))
    }

    /// Linear interpolation between nodes; zero outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => 0.0,
            Some((j, u)) => {
                let h = self.spacing();
                self.values[j] + (self.values[j + 1] - self.values[j]) * (u / h)
            }
        }
    }

    /// `int_t^inf` of the interpolated density.
    pub fn tail(&self, t: f64) -> f64 {
        TailTable::new(self).tail(self, t)
    }
}

/// Right-tail mass of a grid density at every node.
struct TailTable {
    at_node: Vec<f64>,
}

impl TailTable {
    fn new(g: &GridDensity) -> Self {
        let h = g.spacing();
        let mut at_node = alloc::vec![0.0; g.bins + 1];
        let mut acc = 0.0;
        for j in (0..g.bins).rev() {
            acc += 0.5 * h * (g.values[j] + g.values[j + 1]);
            at_node[j] = acc;
        }
        TailTable { at_node }
    }

    fn tail(&self, g: &GridDensity, t: f64) -> f64 {
        if t >= g.half_width {
            return 0.0;
        }
        match g.locate(t) {
            None => self.at_node[0],
            Some((j, u)) => {
                let h = g.spacing();
                let here = g.values[j] + (g.values[j + 1] - g.values[j]) * (u / h);
                self.at_node[j + 1] + 0.5 * (h - u) * (here + g.values[j + 1])
            }
        }
    }
}

/// Smallest `W` (to 1e-6 relative) with `P(|eta| > W) <= mass`.
pub fn truncation_width(dist: &SceneryDistribution, mass: f64) -> f64 {
    let target = log(mass / 2.0);
    let mut hi = 1.0;
    while dist.log_tail_unchecked(hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if dist.log_tail_unchecked(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    /// `f(t) != f(-t)`.
    Asymmetry,
    /// `f` increases between adjacent nonnegative nodes.
    Increase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellViolation {
    pub kind: ViolationKind,
    /// Node where the violation was found.
    pub position: f64,
    /// Amount by which the tolerance was exceeded.
    pub excess: f64,
}

/// `Ok(())` if `gd` is even and nonincreasing on `[0, W]` up to `tol` per
/// node pair; otherwise the first violation scanning outward from 0.
pub fn is_bell_shaped(gd: &GridDensity, tol: f64) -> core::result::Result<(), BellViolation> {
    let v = &gd.values;
    let mid = gd.bins / 2;
    for k in 0..=mid {
        let gap = (v[mid + k] - v[mid - k]).abs();
        if gap > tol {
            return Err(BellViolation {
                kind: ViolationKind::Asymmetry,
                position: gd.node(mid + k),
                excess: gap - tol,
            });
        }
        if k < mid {
            let rise = v[mid + k + 1] - v[mid + k];
            if rise > tol {
                return Err(BellViolation {
                    kind: ViolationKind::Increase,
                    position: gd.node(mid + k + 1),
                    excess: rise - tol,
                });
            }
        }
    }
    Ok(())
}

/// `(f * g)(t_k) = h sum_j f_j g_{k-j}` on the grid of half width `W_f + W_g`.
pub fn convolve(f: &GridDensity, g: &GridDensity) -> Result<GridDensity> {
    let (hf, hg) = (f.spacing(), g.spacing());
    if (hf - hg).abs() > 1e-12 * hf.max(hg) {
        return Err(Error::SpacingMismatch(hf, hg));
    }
    let bins = f.bins + g.bins;
    if bins + 1 > MAX_NODES {
        return Err(invalid("convolution exceeds the grid size limit"));
    }
    let mut out = alloc::vec![0.0; bins + 1];
    for (i, &a) in f.values.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, &b) in out[i..].iter_mut().zip(&g.values) {
            *o += a * b;
        }
    }
    for o in &mut out {
        *o *= hf;
    }
    GridDensity::new(bins as f64 * hf / 2.0, bins, out)
}

/// A probability with its Monte Carlo standard error (zero for grid results).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTail {
    pub probability: f64,
    pub std_error: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMethod {
    MonteCarlo { replicas: usize, seed: u64 },
    /// Iterated grid convolution; `bins` nodes span the density of the
    /// smallest coefficient.
    Grid { bins: usize },
}

fn check_coefficients(coeffs: &[f64], y: f64) -> Result<()> {
    if coeffs.is_empty() {
        return Err(invalid("at least one coefficient is required"));
    }
    if coeffs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(invalid("coefficients must be positive"));
    }
    if !(y > 0.0) {
        return Err(invalid("y must be positive"));
    }
    Ok(())
}

/// `P(sum_j coeffs[j] eta_j > y)` for i.i.d. scenery draws `eta_j`.
pub fn weighted_tail<E: Executor>(
    coeffs: &[f64],
    dist: &SceneryDistribution,
    y: f64,
    method: TailMethod,
    exec: &E,
) -> Result<WeightedTail> {
    check_coefficients(coeffs, y)?;
    match method {
        TailMethod::MonteCarlo { replicas, seed } => {
            let paired = weighted_tail_paired(coeffs, coeffs, dist, y, replicas, seed, exec)?;
            Ok(paired.first)
        }
        TailMethod::Grid { bins } => {
            if coeffs.len() > MAX_GRID_COEFFICIENTS {
                return Err(Error::TooManyCoefficients(coeffs.len()));
            }
            if bins < 2 {
                return Err(invalid("grid needs at least two bins"));
            }
            let smallest = coeffs.iter().copied().fold(f64::INFINITY, f64::min);
            let h = 2.0 * smallest * truncation_width(dist, TRUNCATION_MASS) / bins as f64;
            let mut acc = GridDensity::scaled_scenery(dist, coeffs[0], h)?;
            for &c in &coeffs[1..] {
                acc = convolve(&acc, &GridDensity::scaled_scenery(dist, c, h)?)?;
            }
            Ok(WeightedTail {
                probability: acc.tail(y),
                std_error: 0.0,
                replicas: 0,
            })
        }
    }
}

/// Tails of two weighted sums under common random numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTail {
    pub first: WeightedTail,
    pub second: WeightedTail,
    /// Mean of `1{second > y} - 1{first > y}` and its standard error.
    pub difference: f64,
    pub difference_se: f64,
}

/// Estimates both tails from the same scenery draws, so the difference has
/// far smaller variance than two independent runs.
pub fn weighted_tail_paired<E: Executor>(
    first: &[f64],
    second: &[f64],
    dist: &SceneryDistribution,
    y: f64,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<PairedTail> {
    check_coefficients(first, y)?;
    check_coefficients(second, y)?;
    if first.len() != second.len() {
        return Err(invalid("paired coefficient vectors must have equal length"));
    }
    if replicas < 2 {
        return Err(invalid("at least two replicas are needed"));
    }
    let pairs = exec.map(replicas, |i| {
        let mut r = rng::stream(seed, tag::WEIGHTED, i as u64);
        let (mut s1, mut s2) = (ExactSum::new(), ExactSum::new());
        for (a, b) in first.iter().zip(second) {
            let eta = dist.draw(&mut r);
            s1.add(a * eta);
            s2.add(b * eta);
        }
        (s1.value() > y, s2.value() > y)
    });
    let m = replicas as f64;
    let k1 = pairs.iter().filter(|p| p.0).count() as f64;
    let k2 = pairs.iter().filter(|p| p.1).count() as f64;
    let up = pairs.iter().filter(|p| p.1 && !p.0).count() as f64;
    let down = pairs.iter().filter(|p| p.0 && !p.1).count() as f64;
    let mean = (up - down) / m;
    let second_moment = (up + down) / m;
    let binomial = |k: f64| {
        let p = k / m;
        WeightedTail {
            probability: p,
            std_error: crate::math::sqrt(p * (1.0 - p) / (m - 1.0)),
            replicas,
        }
    };
    Ok(PairedTail {
        first: binomial(k1),
        second: binomial(k2),
        difference: mean,
        difference_se: crate::math::sqrt((second_moment - mean * mean).max(0.0) / (m - 1.0)),
    })
}

/// Both sides of `P(xi + eta > y) - P(xi > y) = int_0^inf P(eta > z)
/// (f_xi(|y - z|) - f_xi(y + z)) dz` for independent symmetric `xi ~ f`,
/// `eta ~ g`, evaluated exactly on the interpolated densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

pub fn symmetric_sum_identity_check(f: &GridDensity, g: &GridDensity, y: f64) -> Result<IdentityReport> {
    if !(y > 0.0) {
        return Err(invalid("y must be positive"));
    }
    let tf = TailTable::new(f);
    let tg = TailTable::new(g);
    let tail_f = |t: f64| tf.tail(f, t);
    let tail_g = |t: f64| tg.tail(g, t);
    let wg = g.half_width;
    let f_nodes = || (0..=f.bins).map(|j| f.node(j));
    let g_nodes = || (0..=g.bins).map(|j| g.node(j));
    // both sides are piecewise polynomials; breaking at every kink makes each
    // Gauss-Kronrod panel exact
    let sorted = |mut v: Vec<f64>, lo: f64, hi: f64| {
        v.retain(|x| *x > lo && *x < hi);
        v.push(lo);
        v.push(hi);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };

    // P(xi + eta > y) - P(xi > y) = int g(s) (T_f(y - s) - T_f(y)) ds
    let at_y = tail_f(y);
    let lhs_breaks = sorted(g_nodes().chain(f_nodes().map(|t| y - t)).collect(), -wg, wg);
    let lhs = integrate_pieces(|s| g.value_at(s) * (tail_f(y - s) - at_y), &lhs_breaks, 1e-13, 1e-16)?.value;

    let rhs_breaks = sorted(
        g_nodes()
            .chain(f_nodes().map(|t| y - t))
            .chain(f_nodes().map(|t| t - y))
            .collect(),
        0.0,
        wg,
    );
    let rhs = integrate_pieces(
        |z| tail_g(z) * (f.value_at((y - z).abs()) - f.value_at(y + z)),
        &rhs_breaks,
        1e-13,
        1e-16,
    )?
    .value;
    Ok(IdentityReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;

    #[test]
    fn flat_density_is_weakly_bell_shaped() {
        let u = GridDensity::from_fn(2.0, 8, |t| if t.abs() <= 1.0 { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(is_bell_shaped(&u, 0.0), Ok(()));
        assert!((u.value_at(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_bumps_are_flagged() {
        let b = GridDensity::from_fn(6.0, 600, |t| exp(-(t - 2.0) * (t - 2.0)) + exp(-(t + 2.0) * (t + 2.0))).unwrap();
        let v = is_bell_shaped(&b, 1e-12).unwrap_err();
        assert_eq!(v.kind, ViolationKind::Increase);
        assert!(v.position > 0.0 && v.position <= 2.0);
    }

    #[test]
    fn shape_validation() {
        assert!(GridDensity::new(1.0, 3, alloc::vec![0.0; 4]).is_err());
        assert!(GridDensity::new(1.0, 2, alloc::vec![0.0; 2]).is_err());
        assert!(GridDensity::new(1.0, 2, alloc::vec![0.0, -1.0, 0.0]).is_err());
        let a = GridDensity::from_fn(1.0, 10, |_| 0.5).unwrap();
        let b = GridDensity::from_fn(1.0, 20, |_| 0.5).unwrap();
        assert!(matches!(convolve(&a, &b), Err(Error::SpacingMismatch(..))));
    }

    #[test]
    fn tail_integrates_interpolant() {
        let tri = GridDensity::from_fn(1.0, 2, |t| 1.0 - t.abs()).unwrap();
        assert!((tri.mass() - 1.0).abs() < 1e-15);
        assert!((tri.tail(0.0) - 0.5).abs() < 1e-15);
        assert!((tri.tail(0.5) - 0.125).abs() < 1e-15);
        assert!((tri.tail(-0.5) - 0.875).abs() < 1e-15);
        assert_eq!(tri.tail(2.0), 0.0);
    }

    #[test]
    fn single_coefficient_rescales_tail() {
        let d = SceneryDistribution::new(1.0, 1.0).unwrap();
        let w = weighted_tail(&[2.0], &d, 3.0, TailMethod::Grid { bins: 4096 }, &crate::Sequential).unwrap();
        let exact = exp(d.log_tail(1.5).unwrap());
        assert!((w.probability - exact).abs() < 1e-5, "{} vs {exact}", w.probability);
        assert!(matches!(
            weighted_tail(&[1.0; 33], &d, 1.0, TailMethod::Grid { bins: 16 }, &crate::Sequential),
            Err(Error::TooManyCoefficients(33))
        ));
    }

    #[test]
    fn degenerate_partner_leaves_identity_trivial() {
        let d = SceneryDistribution::new(2.0, 1.0).unwrap();
        let h = 0.01;
        let xi = GridDensity::scaled_scenery(&d, 1.0, h).unwrap();
        let narrow = GridDensity::from_fn(2.0 * h, 4, |t| (1.0 - t.abs() / (2.0 * h)).max(0.0) / (2.0 * h)).unwrap();
        let r = symmetric_sum_identity_check(&xi, &narrow, 1.0).unwrap();
        assert!(r.residual < 1e-12);
        assert!(r.lhs.abs() < 1e-4 && r.rhs.abs() < 1e-4);
    }
}
