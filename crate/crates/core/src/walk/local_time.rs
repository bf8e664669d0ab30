use alloc::vec::Vec;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use super::{Path, Site};
use crate::error::{invalid, Result};

/// Occupation counts `l_n(x)` of a path, stored in first-visit order.
///
/// The self-intersection sum `sum_x l_n(x)^2` is maintained incrementally.
#[derive(Debug, Clone, Default)]
pub struct LocalTimeField {
    entries: Vec<(Site, u32)>,
    index: HashMap<Site, u32, FxBuildHasher>,
    visits: u64,
    sum_sq: u64,
    max: u32,
}

impl LocalTimeField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_path(path: &Path) -> Self {
        let mut lt = Self::new();
        for &s in path.positions() {
            lt.visit(s);
        }
        lt
    }

    /// Builds a field from explicit counts; repeated sites accumulate.
    pub fn from_counts(counts: impl IntoIterator<Item = (Site, u32)>) -> Result<Self> {
        let mut lt = Self::new();
        for (site, count) in counts {
            if count == 0 {
                return Err(invalid("local times must be positive on stored sites"));
            }
            lt.add(site, count);
        }
        Ok(lt)
    }

    #[inline]
    pub fn visit(&mut self, site: Site) -> u32 {
        self.add(site, 1)
    }

    /// Records one visit and returns the site's slot in first-visit order.
    #[inline]
    pub fn visit_slot(&mut self, site: Site) -> usize {
        let next = self.entries.len() as u32;
        let slot = *self.index.entry(site).or_insert(next);
        let l = if slot == next {
            self.entries.push((site, 1));
            1
        } else {
            let e = &mut self.entries[slot as usize].1;
            *e += 1;
            *e
        };
        self.sum_sq += 2 * l as u64 - 1;
        self.visits += 1;
        self.max = self.max.max(l);
        slot as usize
    }

    /// Adds `count` visits to `site` and returns its new local time.
    #[inline]
    pub fn add(&mut self, site: Site, count: u32) -> u32 {
        let next = self.entries.len() as u32;
        let slot = *self.index.entry(site).or_insert(next);
        let l = if slot == next {
            self.entries.push((site, count));
            count
        } else {
            let e = &mut self.entries[slot as usize].1;
            *e += count;
            *e
        };
        let prev = (l - count) as u64;
        self.sum_sq += (l as u64) * (l as u64) - prev * prev;
        self.visits += count as u64;
        self.max = self.max.max(l);
        l
    }

    /// Empties the field, keeping allocations.
    pub fn clear(&mut self) {
        self.entries.clear();
        self.index.clear();
        self.visits = 0;
        self.sum_sq = 0;
        self.max = 0;
    }

    pub fn get(&self, site: &Site) -> u32 {
        self.index.get(site).map_or(0, |&i| self.entries[i as usize].1)
    }

    /// Sites with their counts, in first-visit order.
    pub fn entries(&self) -> &[(Site, u32)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (Site, u32)> + '_ {
        self.entries.iter().copied()
    }

    /// Size of the range `R_n`.
    pub fn range(&self) -> usize {
        self.entries.len()
    }

    /// `sum_x l_n(x)`, which equals `n + 1`.
    pub fn total_visits(&self) -> u64 {
        self.visits
    }

    /// `sum_x l_n(x)^2`.
    pub fn self_intersection(&self) -> u64 {
        self.sum_sq
    }

    pub fn max_local_time(&self) -> u32 {
        self.max
    }

    /// Position of `site` in first-visit order.
    pub fn slot(&self, site: &Site) -> Option<usize> {
        self.index.get(site).map(|&i| i as usize)
    }
}
