//! Outer importance sampling for walks that pile up local time on one site.
//!
//! `P(X_n >= ny)` is dominated by walks that revisit a single site about
//! `(ny)^a` times, each return costing a factor `P(H_0 < infinity)`. Plain
//! walks almost never do that, so the outer sampler boosts returns.
//!
//! A proposal path is built as follows. Draw a start time `tau` uniformly
//! from `0..=n - window` and a target count `K`; walk plainly up to `tau` and
//! call `x = S_tau` the pile-up site. From then on, at every visit to `x` with
//! at least `window` steps left, decide whether the next excursion from `x`
//! returns within `window` steps. The true probability of "yes" is
//! `pi = P(H_0 <= window)`; the proposal answers "yes" with probability
//! `1 - EPS` until it has made `K` returns, then with `pi`. Excursions are
//! drawn from their exact conditional law by rejection.
//!
//! The likelihood ratio of a path depends only on its visit times: for each
//! candidate `tau` the decisions at later visits to `S_tau` are read off the
//! path, and the proposal density is the average over all candidates. `K` is
//! drawn from a mixture of the plain walk (`K = 0`, which bounds the ratio by
//! the inverse of its weight), a wide uniform range and a focused range
//! around the expected optimal count.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::math::{log, log_sum_exp};
use crate::walk::{LocalTimeField, ReturnLaw, Site, Walker};

/// Weight of the plain walk in the mixture.
pub const DEFENSIVE_WEIGHT: f64 = 0.1;
const WIDE_WEIGHT: f64 = 0.3;
const FOCUSED_WEIGHT: f64 = 1.0 - DEFENSIVE_WEIGHT - WIDE_WEIGHT;
/// Probability of declining a boosted return before the target count.
const EPS: f64 = 0.01;
/// Decision sequences up to this length have their ratio tabulated.
const SHORT: usize = 12;

#[derive(Debug, Clone)]
pub struct ReturnBoost {
    window: usize,
    pi: f64,
    /// `ln((1 - EPS) / pi)` and `ln(EPS / (1 - pi))`.
    ln_yes: f64,
    ln_no: f64,
    max_count: usize,
    focus: (usize, usize),
    /// `ln` mixture weight of each `K` in `0..=max_count`.
    ln_weights: Vec<f64>,
    /// `ln sum_{j >= k} w_j` for `k` in `0..=max_count + 1`.
    ln_tail_weights: Vec<f64>,
    /// `ln_ratio` of every sequence of at most `SHORT` decisions, indexed by
    /// `1 << len | bits` with the first decision in bit 0.
    short: Vec<f64>,
}

/// Reusable buffers for [`ReturnBoost::sample`].
#[derive(Debug, Clone, Default)]
pub struct BoostScratch {
    excursion: Vec<Site>,
    slots: Vec<u32>,
    offsets: Vec<u32>,
    times: Vec<u32>,
    fill: Vec<u32>,
    decisions: Vec<bool>,
    ratios: Vec<f64>,
    total: Vec<f64>,
}

impl ReturnBoost {
    /// `law` must be tabulated to at least `window` steps. Target counts range
    /// over `1..=max_count`, with extra weight on `focus/2 ..= 2 focus`.
    pub fn new(law: &ReturnLaw, window: usize, focus: usize, max_count: usize) -> Self {
        let pi = law.return_by(window);
        let focus = focus.max(1);
        let max_count = max_count.max(2 * focus).max(2);
        let lo = focus.div_ceil(2).max(1);
        let hi = 2 * focus;
        let mut weights = alloc::vec![0.0; max_count + 1];
        weights[0] = DEFENSIVE_WEIGHT;
        for (k, w) in weights.iter_mut().enumerate().skip(1) {
            *w = WIDE_WEIGHT / max_count as f64;
            if (lo..=hi).contains(&k) {
                *w += FOCUSED_WEIGHT / (hi - lo + 1) as f64;
            }
        }
        let mut ln_tail_weights = alloc::vec![f64::NEG_INFINITY; max_count + 2];
        let mut acc = 0.0;
        for k in (0..=max_count).rev() {
            acc += weights[k];
            ln_tail_weights[k] = log(acc);
        }
        let mut boost = ReturnBoost {
            window,
            pi,
            ln_yes: log((1.0 - EPS) / pi),
            ln_no: log(EPS / (1.0 - pi)),
            max_count,
            focus: (lo, hi),
            ln_weights: weights.iter().map(|&w| log(w)).collect(),
            ln_tail_weights,
            short: Vec::new(),
        };
        let mut terms = Vec::new();
        let mut short = alloc::vec![0.0; 1 << (SHORT + 1)];
        for len in 0..=SHORT {
            for bits in 0..1usize << len {
                short[1 << len | bits] = boost.ln_ratio((0..len).map(|j| bits >> j & 1 == 1), &mut terms);
            }
        }
        boost.short = short;
        boost
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn draw_count<R: RngCore>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        if u < DEFENSIVE_WEIGHT {
            0
        } else if u < DEFENSIVE_WEIGHT + WIDE_WEIGHT {
            rng.random_range(1..=self.max_count)
        } else {
            rng.random_range(self.focus.0..=self.focus.1)
        }
    }

    /// `ln(q / p)` given a pile-up started at the first of `decisions`
    /// (`true` = returned within the window), mixed over `K`.
    fn ln_ratio(&self, decisions: impl Iterator<Item = bool>, terms: &mut Vec<f64>) -> f64 {
        terms.clear();
        terms.push(self.ln_weights[0]);
        let (mut r, mut nos) = (0usize, 0usize);
        for yes in decisions {
            if yes {
                r += 1;
                if r <= self.max_count {
                    terms.push(self.ln_weights[r] + r as f64 * self.ln_yes + nos as f64 * self.ln_no);
                }
            } else {
                nos += 1;
            }
        }
        if r < self.max_count {
            terms.push(self.ln_tail_weights[r + 1] + r as f64 * self.ln_yes + nos as f64 * self.ln_no);
        }
        log_sum_exp(terms.iter().copied())
    }

    /// `ln(p / q)` of an `n`-step path whose time-`t` site has slot `slots[t]`.
    fn log_likelihood_ratio(&self, n: usize, slots: &[u32], range: usize, scratch: &mut BoostScratch) -> f64 {
        let w = self.window;
        let last = n - w;
        // visit times grouped by site (counting sort keeps them increasing)
        scratch.offsets.clear();
        scratch.offsets.resize(range + 1, 0);
        for &s in slots {
            scratch.offsets[s as usize + 1] += 1;
        }
        for i in 0..range {
            scratch.offsets[i + 1] += scratch.offsets[i];
        }
        scratch.times.clear();
        scratch.times.resize(slots.len(), 0);
        scratch.fill.clear();
        scratch.fill.extend_from_slice(&scratch.offsets[..range]);
        for (t, &s) in slots.iter().enumerate() {
            scratch.times[scratch.fill[s as usize] as usize] = t as u32;
            scratch.fill[s as usize] += 1;
        }
        scratch.total.clear();
        for site in 0..range {
            let times = &scratch.times[scratch.offsets[site] as usize..scratch.offsets[site + 1] as usize];
            let d = times.partition_point(|&t| t as usize <= last);
            scratch.decisions.clear();
            scratch.decisions.extend((0..d).map(|j| j + 1 < times.len() && (times[j + 1] - times[j]) as usize <= w));
            // walk candidates backwards so the suffix code grows one bit at a time
            let mut code = 1usize;
            for i in (0..d).rev() {
                let len = d - i;
                let ratio = if len <= SHORT {
                    code = (code & !(1 << (len - 1))) << 1 | 1 << len | usize::from(scratch.decisions[i]);
                    self.short[code]
                } else {
                    self.ln_ratio(scratch.decisions[i..].iter().copied(), &mut scratch.ratios)
                };
                scratch.total.push(ratio);
            }
        }
        log((last + 1) as f64) - log_sum_exp(scratch.total.iter().copied())
    }

    /// Runs excursions from `x` until one satisfies `want_return` (back at `x`
    /// within the window or not), leaving its sites in `out`.
    fn excursion<R: RngCore>(&self, walker: &mut Walker<R>, x: Site, want_return: bool, out: &mut Vec<Site>) {
        loop {
            out.clear();
            walker.set_position(x);
            let mut returned = false;
            for _ in 0..self.window {
                let s = walker.step();
                out.push(s);
                if s == x {
                    returned = true;
                    break;
                }
            }
            if returned == want_return {
                return;
            }
        }
    }

    /// Draws an `n`-step walk (`n >= window`) into `lt` and returns its log
    /// likelihood ratio.
    pub fn sample<R: RngCore>(
        &self,
        walker: &mut Walker<R>,
        n: usize,
        lt: &mut LocalTimeField,
        scratch: &mut BoostScratch,
    ) -> f64 {
        assert!(n >= self.window, "path shorter than the return window");
        let count = self.draw_count(walker.rng_mut());
        let tau = walker.rng_mut().random_range(0..=n - self.window);
        lt.clear();
        scratch.slots.clear();
        walker.set_position(Site::ORIGIN);
        scratch.slots.push(lt.visit_slot(Site::ORIGIN) as u32);
        let mut t = 0;
        while t < tau {
            scratch.slots.push(lt.visit_slot(walker.step()) as u32);
            t += 1;
        }
        let x = walker.position();
        let mut returns = 0;
        let mut excursion = core::mem::take(&mut scratch.excursion);
        while t < n {
            if walker.position() == x && n - t >= self.window {
                let q = if returns < count { 1.0 - EPS } else { self.pi };
                let want_return = walker.rng_mut().random::<f64>() < q;
                returns += usize::from(want_return);
                self.excursion(walker, x, want_return, &mut excursion);
                for &s in &excursion {
                    scratch.slots.push(lt.visit_slot(s) as u32);
                }
                t += excursion.len();
            } else {
                scratch.slots.push(lt.visit_slot(walker.step()) as u32);
                t += 1;
            }
        }
        scratch.excursion = excursion;
        let slots = core::mem::take(&mut scratch.slots);
        let lr = self.log_likelihood_ratio(n, &slots, lt.range(), scratch);
        scratch.slots = slots;
        lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;
    use crate::rng;
    use crate::walk::WalkConfig;

    #[test]
    fn ratio_is_bounded_by_plain_component() {
        let cfg = WalkConfig::simple(3).unwrap();
        let law = ReturnLaw::new(cfg, 16);
        let b = ReturnBoost::new(&law, 16, 5, 20);
        let mut lt = LocalTimeField::new();
        let mut scratch = BoostScratch::default();
        for i in 0..200 {
            let mut w = Walker::new(cfg, rng::stream(4, 0, i));
            let lr = b.sample(&mut w, 120, &mut lt, &mut scratch);
            assert!(lr <= log(1.0 / DEFENSIVE_WEIGHT) + 1e-9);
        }
    }

    #[test]
    fn tabulated_ratios_match_direct_sum() {
        let law = ReturnLaw::new(WalkConfig::simple(3).unwrap(), 32);
        let b = ReturnBoost::new(&law, 32, 3, 8);
        let mut terms = Vec::new();
        for bits in [0usize, 1, 0b1011, 0b111111111111, 0b100000000001] {
            let len = 12;
            let direct = b.ln_ratio((0..len).map(|j| bits >> j & 1 == 1), &mut terms);
            assert_eq!(b.short[1 << len | bits], direct);
        }
    }

    #[test]
    fn weighted_functionals_match_true_walk() {
        let cfg = WalkConfig::simple(3).unwrap();
        let n = 300;
        let law = ReturnLaw::new(cfg, n);
        // E[l_n(0)] = sum_{m<=n} u_m exactly
        let origin: f64 = (0..=n).map(|m| law.occupation(m)).sum();
        let boost = ReturnBoost::new(&law, 16, 5, 15);
        let mut lt = LocalTimeField::new();
        let mut scratch = BoostScratch::default();
        let reps = 40_000;
        let mut at_origin = Vec::with_capacity(reps);
        let mut pile = Vec::with_capacity(reps);
        for i in 0..reps {
            let mut w = Walker::new(cfg, rng::stream(2, 0, i as u64));
            let lr = exp(boost.sample(&mut w, n, &mut lt, &mut scratch));
            assert_eq!(lt.total_visits(), n as u64 + 1);
            at_origin.push(lr * lt.get(&Site::ORIGIN) as f64);
            pile.push(lr * f64::from(lt.max_local_time() >= 6));
        }
        let (m, se) = crate::math::mean_and_se(&at_origin);
        assert!((m - origin).abs() < 4.0 * se, "{m} +- {se} vs {origin}");

        // P(max_x l_n(x) >= 6) against plain sampling
        let plain: Vec<f64> = (0..reps)
            .map(|i| {
                let mut w = Walker::new(cfg, rng::stream(3, 0, i as u64));
                crate::rwrs::fill_local_times(&mut w, n, &mut lt);
                f64::from(lt.max_local_time() >= 6)
            })
            .collect();
        let (a, sa) = crate::math::mean_and_se(&pile);
        let (b, sb) = crate::math::mean_and_se(&plain);
        assert!((a - b).abs() < 4.0 * crate::math::sqrt(sa * sa + sb * sb), "{a} +- {sa} vs {b} +- {sb}");
    }
}
