//! The NUTS orbit selection kernel: doubling driven by uniform direction
//! bits, dyadic U-turn checks, and exact enumeration of its pmf.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::integrator::{IntegratorError, Iterate, Leapfrog, DEFAULT_DIVERGENCE_THRESHOLD};
use crate::model::{PhasePoint, Target};
use crate::rng::BitSource;

/// Largest depth accepted by exhaustive enumeration.
pub const MAX_ENUMERATION_DEPTH: u32 = 12;
/// Largest depth accepted by `sample_orbit`.
pub const MAX_DEPTH: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("need {needed} bits, got {got}")]
    NotEnoughBits { needed: usize, got: usize },
    #[error("U-turn window needs a power-of-two length of at least 2, got {0}")]
    BadWindow(usize),
    #[error("maximum depth must be in 1..={max}, got {got}")]
    BadDepth { got: u32, max: u32 },
}

/// A contiguous set of signed iterate indices [lo : hi].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IndexInterval {
    pub lo: i64,
    pub hi: i64,
}

impl IndexInterval {
    pub fn new(lo: i64, hi: i64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn singleton(j: i64) -> Self {
        Self { lo: j, hi: j }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: i64) -> bool {
        self.lo <= j && j <= self.hi
    }

    pub fn shift(&self, j: i64) -> Self {
        Self { lo: self.lo + j, hi: self.hi + j }
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

impl fmt::Display for IndexInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}:{}]", self.lo, self.hi)
    }
}

/// B_K(v) = [−Σ_{i<K} v_i 2^i : 2^K − Σ_{i<K} v_i 2^i − 1].
pub fn index_set_from_bits(v: &[bool], k: usize) -> Result<IndexInterval, OrbitError> {
    if k > v.len() {
        return Err(OrbitError::NotEnoughBits { needed: k, got: v.len() });
    }
    let back: i64 = v[..k].iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| 1i64 << i).sum();
    Ok(IndexInterval::new(-back, (1i64 << k) - back - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum UTurnMode {
    /// The (m, l) windows exactly as printed: for an interval of length
    /// 2^{k+1}, m ∈ 1..=k−1 and l ∈ 1..=2^{k−m}.
    StrictWindows,
    /// Classical NUTS: a doubling is rejected when any dyadic subtree of the
    /// new half turns, and the orbit stops (keeping the doubling) when the
    /// whole interval turns.
    #[default]
    StandardRecursive,
}

/// p₊ᵀ(q₊ − q₋) < 0 or p₋ᵀ(q₊ − q₋) < 0.
pub fn window_turns(minus: &PhasePoint, plus: &PhasePoint) -> bool {
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..minus.q.len() {
        let dq = plus.q[i] - minus.q[i];
        a += plus.p[i] * dq;
        b += minus.p[i] * dq;
    }
    a < 0.0 || b < 0.0
}

fn windows(n: usize, mode: UTurnMode) -> Result<Vec<(usize, usize)>, OrbitError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(OrbitError::BadWindow(n));
    }
    let mut out = Vec::new();
    match mode {
        UTurnMode::StandardRecursive => {
            let mut s = 2;
            while s <= n {
                out.extend((0..n).step_by(s).map(|a| (a, a + s - 1)));
                s *= 2;
            }
        }
        UTurnMode::StrictWindows => {
            let k = n.trailing_zeros() as usize - 1;
            for m in 1..k {
                for l in 1..=(1usize << (k - m)) {
                    out.push(((l - 1) << m, (l << m) - 1));
                }
            }
        }
    }
    Ok(out)
}

fn turns_by<'a>(n: usize, at: impl Fn(usize) -> &'a PhasePoint, mode: UTurnMode) -> Result<bool, OrbitError> {
    Ok(windows(n, mode)?.into_iter().any(|(a, b)| window_turns(at(a), at(b))))
}

/// Whether any window checked by `mode` turns, for states listed in index order.
pub fn u_turn_triggered(states: &[PhasePoint], mode: UTurnMode) -> Result<bool, OrbitError> {
    turns_by(states.len(), |i| &states[i], mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    UTurn,
    MaxDepth,
    Divergence,
}

/// An accepted doubling: the interval before it, the half it added and the
/// log-sums of the weights exp(−H) on each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Doubling {
    pub old: IndexInterval,
    pub new: IndexInterval,
    pub log_weight_old: f64,
    pub log_weight_new: f64,
}

#[derive(Debug, Clone)]
pub struct Orbit {
    pub interval: IndexInterval,
    pub states: VecDeque<PhasePoint>,
    /// −H at each index of `interval`.
    pub log_weights: VecDeque<f64>,
    pub bits: Vec<bool>,
    pub last_half: Option<IndexInterval>,
    pub levels: Vec<Doubling>,
    pub stopped_by: StopReason,
    /// The half computed by the final doubling and then discarded.
    pub rejected: Option<IndexInterval>,
    pub diverged: bool,
    pub grad_evals: u64,
}

/// Hook called after every accepted doubling, once the new half is in the orbit.
pub trait DoublingObserver {
    fn on_doubling(&mut self, orbit: &Orbit, level: &Doubling);
}

impl DoublingObserver for () {
    fn on_doubling(&mut self, _: &Orbit, _: &Doubling) {}
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Orbit {
    pub fn anchor(&self) -> &PhasePoint {
        self.state(0)
    }

    pub fn state(&self, j: i64) -> &PhasePoint {
        &self.states[(j - self.interval.lo) as usize]
    }

    pub fn log_weight(&self, j: i64) -> f64 {
        self.log_weights[(j - self.interval.lo) as usize]
    }

    pub fn size(&self) -> usize {
        self.interval.len()
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn log_weight_sum(&self, range: IndexInterval) -> f64 {
        log_sum_exp(range.iter().map(|j| self.log_weight(j)))
    }

    /// max_j |H_j − H_0| over the orbit.
    pub fn max_energy_error(&self) -> f64 {
        let h0 = -self.log_weight(0);
        self.log_weights.iter().map(|w| (-w - h0).abs()).fold(0.0, f64::max)
    }

    /// (min H, max H) over the orbit.
    pub fn energy_range(&self) -> (f64, f64) {
        self.log_weights.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(-w), b.max(-w)))
    }

    /// Builds an orbit with arbitrary weights on a fixed doubling history.
    /// The states are all copies of `anchor`; only the index bookkeeping and
    /// weights are meaningful.
    pub fn synthetic(anchor: PhasePoint, bits: &[bool], log_weight: impl Fn(i64) -> f64) -> Self {
        let mut lo = 0i64;
        let mut hi = 0i64;
        let mut levels = Vec::new();
        for &b in bits {
            let size = hi - lo + 1;
            let old = IndexInterval::new(lo, hi);
            let new = if b { IndexInterval::new(lo - size, lo - 1) } else { IndexInterval::new(hi + 1, hi + size) };
            lo = lo.min(new.lo);
            hi = hi.max(new.hi);
            levels.push(Doubling {
                old,
                new,
                log_weight_old: log_sum_exp(old.iter().map(&log_weight)),
                log_weight_new: log_sum_exp(new.iter().map(&log_weight)),
            });
        }
        let interval = IndexInterval::new(lo, hi);
        Self {
            interval,
            states: interval.iter().map(|_| anchor.clone()).collect(),
            log_weights: interval.iter().map(&log_weight).collect(),
            bits: bits.to_vec(),
            last_half: levels.last().map(|l| l.new),
            levels,
            stopped_by: StopReason::MaxDepth,
            rejected: None,
            diverged: false,
            grad_evals: 0,
        }
    }
}

/// Options for `sample_orbit` beyond the step size and depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    pub mode: UTurnMode,
    pub divergence_threshold: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { mode: UTurnMode::StandardRecursive, divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD }
    }
}

pub fn sample_orbit(
    target: &Target,
    anchor: &PhasePoint,
    h: f64,
    max_depth: u32,
    bits: &mut impl BitSource,
) -> Result<Orbit, OrbitError> {
    sample_orbit_with(target, anchor, h, max_depth, OrbitOptions::default(), bits, &mut ())
}

pub fn sample_orbit_with(
    target: &Target,
    anchor: &PhasePoint,
    h: f64,
    max_depth: u32,
    options: OrbitOptions,
    bits: &mut impl BitSource,
    observer: &mut impl DoublingObserver,
) -> Result<Orbit, OrbitError> {
    if max_depth == 0 || max_depth > MAX_DEPTH {
        return Err(OrbitError::BadDepth { got: max_depth, max: MAX_DEPTH });
    }
    let mut lf = Leapfrog::new(target, h)?.with_threshold(options.divergence_threshold);
    let start = lf.start(anchor)?;
    let mut orbit = Orbit {
        interval: IndexInterval::singleton(0),
        states: VecDeque::from([anchor.clone()]),
        log_weights: VecDeque::from([-start.hamiltonian()]),
        bits: Vec::new(),
        last_half: None,
        levels: Vec::new(),
        stopped_by: StopReason::MaxDepth,
        rejected: None,
        diverged: false,
        grad_evals: 0,
    };
    let mut front: Iterate = start.clone();
    let mut back: Iterate = start;

    for _ in 0..max_depth {
        let backward = bits.next_bit();
        orbit.bits.push(backward);
        let old = orbit.interval;
        let size = old.len() as i64;
        let new = if backward {
            IndexInterval::new(old.lo - size, old.lo - 1)
        } else {
            IndexInterval::new(old.hi + 1, old.hi + size)
        };

        // New states in generation order, moving away from the old interval.
        let mut fresh: Vec<Iterate> = Vec::with_capacity(size as usize);
        let mut diverged = false;
        let mut cur = if backward { front.clone() } else { back.clone() };
        for s in 1..=size {
            let index = if backward { old.lo - s } else { old.hi + s };
            match lf.step(&cur, !backward, index) {
                Ok(next) => {
                    fresh.push(next.clone());
                    cur = next;
                }
                Err(IntegratorError::Divergence { .. }) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if diverged {
            orbit.rejected = Some(new);
            orbit.diverged = true;
            orbit.stopped_by = StopReason::Divergence;
            break;
        }

        let new_points: Vec<PhasePoint> = if backward {
            fresh.iter().rev().map(|it| it.point.clone()).collect()
        } else {
            fresh.iter().map(|it| it.point.clone()).collect()
        };
        let new_weights: Vec<f64> = if backward {
            fresh.iter().rev().map(|it| -it.hamiltonian()).collect()
        } else {
            fresh.iter().map(|it| -it.hamiltonian()).collect()
        };

        let reject = match options.mode {
            UTurnMode::StandardRecursive => {
                new_points.len() >= 2 && u_turn_triggered(&new_points, UTurnMode::StandardRecursive)?
            }
            UTurnMode::StrictWindows => {
                let n = 2 * size as usize;
                let (lo_pts, hi_pts): (Vec<&PhasePoint>, Vec<&PhasePoint>) = if backward {
                    (new_points.iter().collect(), orbit.states.iter().collect())
                } else {
                    (orbit.states.iter().collect(), new_points.iter().collect())
                };
                let half = size as usize;
                n >= 2
                    && turns_by(n, |i| if i < half { lo_pts[i] } else { hi_pts[i - half] }, UTurnMode::StrictWindows)?
            }
        };
        if reject {
            orbit.rejected = Some(new);
            orbit.stopped_by = StopReason::UTurn;
            break;
        }

        let level = Doubling {
            old,
            new,
            log_weight_old: orbit.log_weight_sum(old),
            log_weight_new: log_sum_exp(new_weights.iter().copied()),
        };
        if backward {
            for (p, w) in new_points.into_iter().zip(new_weights).rev() {
                orbit.states.push_front(p);
                orbit.log_weights.push_front(w);
            }
            front = cur;
        } else {
            orbit.states.extend(new_points);
            orbit.log_weights.extend(new_weights);
            back = cur;
        }
        orbit.interval = IndexInterval::new(old.lo.min(new.lo), old.hi.max(new.hi));
        orbit.last_half = Some(new);
        orbit.levels.push(level);
        observer.on_doubling(&orbit, &level);

        if options.mode == UTurnMode::StandardRecursive
            && window_turns(orbit.state(orbit.interval.lo), orbit.state(orbit.interval.hi))
        {
            orbit.stopped_by = StopReason::UTurn;
            break;
        }
    }
    orbit.grad_evals = lf.grad_evals();
    Ok(orbit)
}

/// Serves a fixed prefix, then records that more bits were wanted.
struct PrefixBits<'a> {
    prefix: &'a [bool],
    pos: usize,
    overflow: bool,
}

impl BitSource for PrefixBits<'_> {
    fn next_bit(&mut self) -> bool {
        let b = self.prefix.get(self.pos).copied();
        self.pos += 1;
        b.unwrap_or_else(|| {
            self.overflow = true;
            false
        })
    }
}

/// Exact law of the returned interval, found by walking the tree of bit
/// prefixes: each terminal prefix of length c contributes 2^{−c}.
pub fn orbit_distribution(
    target: &Target,
    anchor: &PhasePoint,
    h: f64,
    max_depth: u32,
    options: OrbitOptions,
) -> Result<BTreeMap<IndexInterval, f64>, OrbitError> {
    if max_depth == 0 || max_depth > MAX_ENUMERATION_DEPTH {
        return Err(OrbitError::BadDepth { got: max_depth, max: MAX_ENUMERATION_DEPTH });
    }
    let mut out = BTreeMap::new();
    let mut stack: Vec<Vec<bool>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let mut src = PrefixBits { prefix: &prefix, pos: 0, overflow: false };
        let orbit = sample_orbit_with(target, anchor, h, max_depth, options, &mut src, &mut ())?;
        if src.overflow {
            for b in [true, false] {
                let mut p = prefix.clone();
                p.push(b);
                stack.push(p);
            }
        } else {
            *out.entry(orbit.interval).or_insert(0.0) += 0.5f64.powi(prefix.len() as i32);
        }
    }
    Ok(out)
}

pub fn orbit_pmf(
    target: &Target,
    anchor: &PhasePoint,
    h: f64,
    max_depth: u32,
    options: OrbitOptions,
    j: IndexInterval,
) -> Result<f64, OrbitError> {
    Ok(orbit_distribution(target, anchor, h, max_depth, options)?.get(&j).copied().unwrap_or(0.0))
}
