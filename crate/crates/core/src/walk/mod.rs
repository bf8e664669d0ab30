//! Nearest-neighbour lattice walks on `Z^d`.

mod local_time;
mod returns;
mod sojourn;

use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{invalid, Result};
use crate::rng::{self, StreamRng};

pub use local_time::LocalTimeField;
pub use returns::ReturnLaw;
pub use sojourn::{
    box_region, estimate_return_prob, green_function, local_time_distribution, local_time_tail, localization_fit, sojourn_time,
    LocalizationFit, Region,
    Roulette, Sojourn, Truncation,
};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 8;

/// A lattice point. Coordinates beyond the walk's dimension stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn from_coords(coords: &[i32]) -> Site {
        let mut s = [0; MAX_DIM];
        s[..coords.len()].copy_from_slice(coords);
        Site(s)
    }

    /// Sup-norm `max_i |x_i|`.
    pub fn norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Site {
        let mut s = self.0;
        for c in &mut s {
            *c = -*c;
        }
        Site(s)
    }

    pub fn is_origin(&self) -> bool {
        self.0 == [0; MAX_DIM]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IncrementLaw {
    /// Uniform on the `2d` unit vectors.
    Simple,
    /// Hold with probability 1/2, otherwise a simple step.
    LazySimple,
}

impl IncrementLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            IncrementLaw::Simple => "simple",
            IncrementLaw::LazySimple => "lazy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WalkConfig {
    dim: usize,
    law: IncrementLaw,
}

impl WalkConfig {
    pub fn new(dim: usize, law: IncrementLaw) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(alloc::format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        Ok(WalkConfig { dim, law })
    }

    pub fn simple(dim: usize) -> Result<Self> {
        Self::new(dim, IncrementLaw::Simple)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn law(&self) -> IncrementLaw {
        self.law
    }

    pub fn is_transient(&self) -> bool {
        self.dim >= 3
    }

    /// Whether `b - a` is a legal increment.
    pub fn is_step(&self, a: &Site, b: &Site) -> bool {
        let mut moved = 0;
        for i in 0..MAX_DIM {
            let diff = b.0[i] - a.0[i];
            if diff != 0 {
                if i >= self.dim || diff.abs() != 1 {
                    return false;
                }
                moved += 1;
            }
        }
        moved == 1 || (moved == 0 && self.law == IncrementLaw::LazySimple)
    }
}

/// Incremental walk driven by an RNG, consuming a few bits per step.
#[derive(Debug, Clone)]
pub struct Walker<R = StreamRng> {
    dim: usize,
    lazy: bool,
    dir_bits: u32,
    pos: Site,
    rng: R,
    buf: u64,
    avail: u32,
}

impl<R: RngCore> Walker<R> {
    pub fn new(config: WalkConfig, rng: R) -> Self {
        let dirs = 2 * config.dim as u32;
        Walker {
            dim: config.dim,
            lazy: config.law == IncrementLaw::LazySimple,
            dir_bits: 32 - (dirs - 1).leading_zeros(),
            pos: Site::ORIGIN,
            rng,
            buf: 0,
            avail: 0,
        }
    }

    #[inline]
    fn bits(&mut self, k: u32) -> u64 {
        if self.avail < k {
            self.buf = self.rng.next_u64();
            self.avail = 64;
        }
        let v = self.buf & ((1u64 << k) - 1);
        self.buf >>= k;
        self.avail -= k;
        v
    }

    /// Draws one increment as `(axis, sign)`, or `None` for a lazy hold.
    #[inline]
    pub fn increment(&mut self) -> Option<(usize, i32)> {
        if self.lazy && self.bits(1) == 0 {
            return None;
        }
        let dirs = 2 * self.dim as u64;
        loop {
            let c = self.bits(self.dir_bits);
            if c < dirs {
                return Some(((c >> 1) as usize, if c & 1 == 0 { 1 } else { -1 }));
            }
        }
    }

    /// Advances one step and returns the new position.
    #[inline]
    pub fn step(&mut self) -> Site {
        if let Some((axis, sign)) = self.increment() {
            self.pos.0[axis] += sign;
        }
        self.pos
    }

    /// Advances one step and returns the axis that moved, if any.
    #[inline]
    pub fn step_axis(&mut self) -> Option<usize> {
        let (axis, sign) = self.increment()?;
        self.pos.0[axis] += sign;
        Some(axis)
    }

    pub fn position(&self) -> Site {
        self.pos
    }

    pub fn set_position(&mut self, site: Site) {
        self.pos = site;
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// Positions `S_0 = 0, S_1, ..., S_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    config: WalkConfig,
    positions: Vec<Site>,
}

impl Path {
    pub fn from_positions(config: WalkConfig, positions: Vec<Site>) -> Result<Path> {
        match positions.first() {
            Some(s) if s.is_origin() => {}
            _ => return Err(invalid("a path must start at the origin")),
        }
        for w in positions.windows(2) {
            if !config.is_step(&w[0], &w[1]) {
                return Err(invalid("consecutive positions must differ by a legal increment"));
            }
        }
        Ok(Path { config, positions })
    }

    pub fn config(&self) -> WalkConfig {
        self.config
    }

    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn positions(&self) -> &[Site] {
        &self.positions
    }
}

/// A seeded `n`-step path.
pub fn simulate_path(config: WalkConfig, n: usize, seed: u64) -> Path {
    let mut walker = Walker::new(config, rng::stream(seed, rng::tag::PATH, 0));
    let mut positions = Vec::with_capacity(n + 1);
    positions.push(Site::ORIGIN);
    for _ in 0..n {
        positions.push(walker.step());
    }
    Path { config, positions }
}

/// `max_{k <= n} |S_k|` in sup-norm.
pub fn max_displacement(path: &Path) -> u32 {
    path.positions.iter().map(Site::norm).max().unwrap_or(0)
}

/// Local times of a path.
pub fn local_times(path: &Path) -> LocalTimeField {
    LocalTimeField::from_path(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_path_is_origin() {
        let p = simulate_path(WalkConfig::simple(1).unwrap(), 0, 99);
        assert_eq!(p.positions(), &[Site::ORIGIN]);
        assert_eq!(max_displacement(&p), 0);
    }

    #[test]
    fn paths_are_deterministic_and_legal() {
        for law in [IncrementLaw::Simple, IncrementLaw::LazySimple] {
            for d in 1..=MAX_DIM {
                let cfg = WalkConfig::new(d, law).unwrap();
                let a = simulate_path(cfg, 500, 3);
                assert_eq!(a, simulate_path(cfg, 500, 3));
                assert!(Path::from_positions(cfg, a.positions().to_vec()).is_ok());
                assert!(max_displacement(&a) <= 500);
            }
        }
    }

    #[test]
    fn all_directions_are_used() {
        let cfg = WalkConfig::simple(3).unwrap();
        let p = simulate_path(cfg, 6000, 11);
        let mut counts = [0u32; 6];
        for w in p.positions().windows(2) {
            for axis in 0..3 {
                let d = w[1].0[axis] - w[0].0[axis];
                if d != 0 {
                    counts[2 * axis + usize::from(d < 0)] += 1;
                }
            }
        }
        // each direction has mean 1000 and sd ~29
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
    }

    #[test]
    fn lazy_walk_holds_half_the_time() {
        let cfg = WalkConfig::new(2, IncrementLaw::LazySimple).unwrap();
        let p = simulate_path(cfg, 10_000, 5);
        let holds = p.positions().windows(2).filter(|w| w[0] == w[1]).count();
        assert!((4800..5200).contains(&holds), "{holds}");
    }

    #[test]
    fn rejects_illegal_paths() {
        let cfg = WalkConfig::simple(1).unwrap();
        let jump = alloc::vec![Site::ORIGIN, Site::from_coords(&[2])];
        assert!(Path::from_positions(cfg, jump).is_err());
        let hold = alloc::vec![Site::ORIGIN, Site::ORIGIN];
        assert!(Path::from_positions(cfg, hold).is_err());
        assert!(WalkConfig::simple(0).is_err());
        assert!(WalkConfig::simple(MAX_DIM + 1).is_err());
    }

    #[test]
    fn sup_norm() {
        assert_eq!(Site::from_coords(&[3, -5]).norm(), 5);
    }
}
