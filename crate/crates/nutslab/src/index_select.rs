//! Index selection on a sampled orbit: multinomial weights exp(−H), and
//! biased progressive selection that favours the most recently added half.

use rand::Rng;
use serde::Serialize;

use crate::orbit::{log_sum_exp, Doubling, DoublingObserver, IndexInterval, Orbit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SelectionRule {
    Multinomial,
    Bps,
}

/// A pmf over the indices of an interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexPmf {
    pub interval: IndexInterval,
    pub probs: Vec<f64>,
}

impl IndexPmf {
    pub fn prob(&self, j: i64) -> f64 {
        if self.interval.contains(j) {
            self.probs[(j - self.interval.lo) as usize]
        } else {
            0.0
        }
    }

    /// Inverse-cdf draw from a uniform u ∈ [0, 1).
    pub fn sample_with(&self, u: f64) -> i64 {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.interval.lo + i as i64;
            }
        }
        // Rounding left u beyond the last partial sum; take the last index with mass.
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        self.interval.lo + last as i64
    }

    pub fn sample(&self, rng: &mut impl Rng) -> i64 {
        self.sample_with(rng.random::<f64>())
    }

    /// |A| · min_{i∈A} p(i), the mass of the largest uniform component on A.
    pub fn uniform_mass(&self, on: IndexInterval) -> f64 {
        on.len() as f64 * on.iter().map(|j| self.prob(j)).fold(f64::INFINITY, f64::min)
    }
}

/// Softmax of `log_weights` placed on `interval`.
pub fn softmax_pmf(interval: IndexInterval, log_weights: &[f64]) -> IndexPmf {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    IndexPmf { interval, probs: w.into_iter().map(|x| x / s).collect() }
}

pub fn multinomial_pmf(orbit: &Orbit) -> IndexPmf {
    let lw: Vec<f64> = orbit.log_weights.iter().copied().collect();
    softmax_pmf(orbit.interval, &lw)
}

/// R = 1 ∧ (Σ exp(new) / Σ exp(old)).
pub fn progress_ratio(log_weights_old: &[f64], log_weights_new: &[f64]) -> f64 {
    ratio_from_sums(log_sum_exp(log_weights_old.iter().copied()), log_sum_exp(log_weights_new.iter().copied()))
}

fn ratio_from_sums(old: f64, new: f64) -> f64 {
    (new - old).exp().min(1.0)
}

pub fn level_ratio(level: &Doubling) -> f64 {
    ratio_from_sums(level.log_weight_old, level.log_weight_new)
}

/// The expanded BPS pmf: level k contributes Π_{ℓ>k}(1 − R_ℓ) R_k times the
/// multinomial pmf on its new half, and index 0 keeps the residual Π(1 − R).
pub fn bps_pmf(orbit: &Orbit) -> IndexPmf {
    let mut probs = vec![0.0; orbit.size()];
    let lo = orbit.interval.lo;
    let mut survive = 1.0;
    for level in orbit.levels.iter().rev() {
        let r = level_ratio(level);
        let lw: Vec<f64> = level.new.iter().map(|j| orbit.log_weight(j)).collect();
        let mul = softmax_pmf(level.new, &lw);
        for j in level.new.iter() {
            probs[(j - lo) as usize] += survive * r * mul.prob(j);
        }
        survive *= 1.0 - r;
    }
    probs[(-lo) as usize] += survive;
    IndexPmf { interval: orbit.interval, probs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BpsLevel {
    pub old: IndexInterval,
    pub new: IndexInterval,
    pub ratio: f64,
    pub swapped: bool,
}

/// Online BPS selection: keeps one candidate and, after every accepted
/// doubling, replaces it with probability R by a multinomial draw from the
/// new half.
#[derive(Debug)]
pub struct BpsSelector<'r, R: Rng> {
    rng: &'r mut R,
    candidate: i64,
    trace: Vec<BpsLevel>,
}

impl<'r, R: Rng> BpsSelector<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Self { rng, candidate: 0, trace: Vec::new() }
    }

    pub fn selected(&self) -> i64 {
        self.candidate
    }

    pub fn trace(&self) -> &[BpsLevel] {
        &self.trace
    }

    /// Replays the doublings of a finished orbit, which is equivalent to
    /// observing them online.
    pub fn replay(mut self, orbit: &Orbit) -> (i64, Vec<BpsLevel>) {
        for level in &orbit.levels {
            self.on_doubling(orbit, level);
        }
        (self.candidate, self.trace)
    }
}

impl<R: Rng> DoublingObserver for BpsSelector<'_, R> {
    fn on_doubling(&mut self, orbit: &Orbit, level: &Doubling) {
        let ratio = level_ratio(level);
        let swapped = self.rng.random::<f64>() < ratio;
        if swapped {
            let lw: Vec<f64> = level.new.iter().map(|j| orbit.log_weight(j)).collect();
            self.candidate = softmax_pmf(level.new, &lw).sample(self.rng);
        }
        self.trace.push(BpsLevel { old: level.old, new: level.new, ratio, swapped });
    }
}
