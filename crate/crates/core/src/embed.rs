//! The continuous-time exponential embedding of the GN chain.
//!
//! Every potential vertex `a` owns clocks `X(a, j) ~ exp(f(j))`; its `i`-th child is
//! born at `B(a·i) = B(a) + X(a, 0) + ... + X(a, i-1)`. The state keeps one pending
//! event per living vertex (the birth time of its next child) in a min-heap; popping
//! the minimum and re-arming the two affected vertices generates the births in time
//! order. Equal times are broken by lexicographic label order.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::check_rate_bound;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, RateTable, TailSum};
use crate::rng::ClockSource;
use crate::scalar::Scalar;
use crate::tree::{Label, LabelledTree};

#[derive(Debug, Clone, PartialEq)]
struct Pending<T> {
    time: T,
    label: Box<[u32]>,
    vertex: u32,
}

impl<T: Scalar> Eq for Pending<T> {}

impl<T: Scalar> Ord for Pending<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .partial_cmp(&other.time)
            .expect("event times are never NaN")
            .then_with(|| self.label.cmp(&other.label))
    }
}

impl<T: Scalar> PartialOrd for Pending<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Birth<T> {
    pub parent: usize,
    pub child: usize,
    pub time: T,
}

/// Explosion-time interval for a single vertex: `P(a)` lies in `[low, high]` except
/// with probability at most `1 - confidence` over the unrealized suffix clocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplosionEstimate<T> {
    /// `sum_{j < N} X(a, j)`.
    pub partial: T,
    pub tail: TailSum<T>,
    pub delta: T,
    pub low: T,
    pub high: T,
    /// `N` fell below the kernel's Chernoff threshold; `delta` was widened.
    pub below_n0: bool,
}

impl<T: Scalar> ExplosionEstimate<T> {
    pub fn midpoint(&self) -> T {
        self.partial + self.tail.value
    }

    pub fn width(&self) -> T {
        self.high - self.low
    }
}

/// Deviation `delta` such that each one-sided deviation of `sum_{j >= n} X_j` from its
/// mean beyond `delta` has probability below `(1 - confidence) / 2`.
///
/// Uses `P(A > delta) <= exp(2 s^2 c - s delta)` with `c = sum_{j >= n} f(j)^-2`, valid for
/// `0 < s <= f(n)/2`, and the same bound for the lower deviation. `s` is optimized and
/// capped at `f(n)/2`.
pub fn deviation_delta<T: Scalar>(kernel: &Kernel<T>, n: usize, confidence: f64) -> Result<(T, bool)> {
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::InvalidArgument(format!("confidence {confidence} not in [0, 1)")));
    }
    let log_term = (2.0 / (1.0 - confidence)).ln();
    let c = kernel.reciprocal_tail(n, 2, crate::kernel::DEFAULT_TAIL_TOL)?.high().as_f64();
    let s_max = 0.5 * kernel.eval(n).as_f64();
    let s = (log_term / (2.0 * c)).sqrt().min(s_max);
    let delta = (log_term + 2.0 * s * s * c) / s;
    let below_n0 = n < kernel.chernoff_n0();
    if below_n0 {
        log::warn!("truncation {n} below the Chernoff threshold {}; delta widened to {delta}", kernel.chernoff_n0());
    }
    Ok((T::lit(delta), below_n0))
}

fn estimate_from_key<T: Scalar>(key: u64, kernel: &Kernel<T>, n_trunc: usize, tail: TailSum<T>, delta: T, below_n0: bool) -> ExplosionEstimate<T> {
    let mut partial = T::zero();
    for j in 0..n_trunc {
        partial = partial + ClockSource::clock(key, j as u64, kernel.eval(j));
    }
    let pad = tail.error_bound + delta;
    ExplosionEstimate { partial, tail, delta, low: partial + tail.value - pad, high: partial + tail.value + pad, below_n0 }
}

/// Interval estimate of the explosion time `P(a) = sum_j X(a, j)` from the first
/// `n_trunc` realized clocks plus the mean of the remainder.
pub fn explosion_estimate<T: Scalar>(
    a: &Label,
    kernel: &Kernel<T>,
    clocks: &ClockSource,
    n_trunc: usize,
    confidence: f64,
) -> Result<ExplosionEstimate<T>> {
    let tail = kernel.tail_mean(n_trunc)?;
    let (delta, below_n0) = deviation_delta(kernel, n_trunc, confidence)?;
    Ok(estimate_from_key(clocks.key(a), kernel, n_trunc, tail, delta, below_n0))
}

/// Estimate of the tree explosion time `S = min_a B(a) + P(a)` and its minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeExplosion<T> {
    pub v_hat: usize,
    pub low: T,
    pub mid: T,
    pub high: T,
}

#[derive(Debug, Clone)]
struct Tracker<T> {
    n_trunc: usize,
    tail: TailSum<T>,
    delta: T,
    best: TreeExplosion<T>,
}

#[derive(Debug, Clone)]
pub struct EmbedState<T> {
    now: T,
    tree: LabelledTree,
    birth: Vec<T>,
    next_event: Vec<T>,
    keys: Vec<u64>,
    pending: BinaryHeap<Reverse<Pending<T>>>,
    rates: RateTable<T>,
    clocks: ClockSource,
    total_weight: T,
    violations: u64,
    tracker: Option<Tracker<T>>,
}

impl<T: Scalar> EmbedState<T> {
    pub fn new(kernel: Kernel<T>, clocks: ClockSource) -> Result<Self> {
        let mut rates = RateTable::new(kernel);
        let root_key = clocks.root_key();
        let first = ClockSource::clock(root_key, 0, rates.rate(0)?);
        let mut pending = BinaryHeap::new();
        pending.push(Reverse(Pending { time: first, label: Box::new([]), vertex: 0 }));
        let total_weight = rates.rate(0)?;
        Ok(Self {
            now: T::zero(),
            tree: LabelledTree::new(),
            birth: vec![T::zero()],
            next_event: vec![first],
            keys: vec![root_key],
            pending,
            rates,
            clocks,
            total_weight,
            violations: 0,
            tracker: None,
        })
    }

    pub fn now(&self) -> T {
        self.now
    }

    pub fn tree(&self) -> &LabelledTree {
        &self.tree
    }

    pub fn kernel(&self) -> &Kernel<T> {
        self.rates.kernel()
    }

    pub fn clocks(&self) -> &ClockSource {
        &self.clocks
    }

    pub fn births(&self) -> usize {
        self.tree.size() - 1
    }

    /// `B(v)` by vertex index.
    pub fn birth_times(&self) -> &[T] {
        &self.birth
    }

    /// Birth time of `v`'s next child.
    pub fn next_event_time(&self, v: usize) -> T {
        self.next_event[v]
    }

    pub fn peek_time(&self) -> Option<T> {
        self.pending.peek().map(|Reverse(p)| p.time)
    }

    pub fn violations(&self) -> u64 {
        self.violations
    }

    fn arm(&mut self, v: usize, time: T) {
        self.next_event[v] = time;
        let label = self.tree.label(v).path().into();
        self.pending.push(Reverse(Pending { time, label, vertex: v as u32 }));
    }

    /// Pops the earliest pending event and realizes that birth.
    pub fn next_birth(&mut self) -> Result<Birth<T>> {
        let Reverse(ev) = self.pending.pop().ok_or_else(|| Error::InvalidArgument("no pending events".into()))?;
        let a = ev.vertex as usize;
        debug_assert!(ev.time >= self.now, "event times must be nondecreasing");
        self.now = ev.time;
        let d = self.tree.deg(a);
        let (old, new, fresh) = (self.rates.rate(d)?, self.rates.rate(d + 1)?, self.rates.rate(0)?);
        let child = self.tree.add_child_at(a);
        let child_key = ClockSource::child_key(self.keys[a], (d + 1) as u32);
        self.keys.push(child_key);
        self.birth.push(ev.time);
        self.next_event.push(T::zero());
        let a_next = ev.time + ClockSource::clock(self.keys[a], (d + 1) as u64, new);
        self.arm(a, a_next);
        let c_next = ev.time + ClockSource::clock(child_key, 0, fresh);
        self.arm(child, c_next);
        self.total_weight = self.total_weight + new - old + fresh;
        if !check_rate_bound(self.total_weight, self.births(), &mut self.rates)? {
            self.violations += 1;
        }
        self.track(child);
        Ok(Birth { parent: a, child, time: ev.time })
    }

    fn vertex_estimate(&self, v: usize, n_trunc: usize, tail: TailSum<T>, delta: T) -> TreeExplosion<T> {
        let kernel = self.kernel();
        let mut acc = self.birth[v];
        for j in 0..n_trunc {
            acc = acc + ClockSource::clock(self.keys[v], j as u64, kernel.eval(j));
        }
        let mid = acc + tail.value;
        let pad = tail.error_bound + delta;
        TreeExplosion { v_hat: v, low: mid - pad, mid, high: mid + pad }
    }

    /// Lower bound on `B(v) + P_hat(v)` from already realized clocks.
    fn lower_bound(&self, v: usize, n_trunc: usize) -> Option<T> {
        (self.tree.deg(v) < n_trunc).then_some(self.next_event[v])
    }

    fn track(&mut self, v: usize) {
        let Some(tr) = &self.tracker else { return };
        let (n, tail, delta, best_mid) = (tr.n_trunc, tr.tail, tr.delta, tr.best.mid);
        if self.lower_bound(v, n).is_some_and(|lb| lb >= best_mid) {
            return;
        }
        let cand = self.vertex_estimate(v, n, tail, delta);
        let tr = self.tracker.as_mut().expect("checked above");
        if (cand.mid, &self.tree.label(v)) < (tr.best.mid, &self.tree.label(tr.best.v_hat)) {
            tr.best = cand;
        }
    }

    /// Minimum over living vertices of `B(a) + P_hat(a)`, computed from scratch.
    pub fn tree_explosion_estimate(&self, n_trunc: usize, confidence: f64) -> Result<TreeExplosion<T>> {
        let tail = self.kernel().tail_mean(n_trunc)?;
        let (delta, _) = deviation_delta(self.kernel(), n_trunc, confidence)?;
        Ok(self.scan_minimum(n_trunc, tail, delta))
    }

    fn scan_minimum(&self, n_trunc: usize, tail: TailSum<T>, delta: T) -> TreeExplosion<T> {
        let mut order: Vec<(T, usize)> = (0..self.tree.size())
            .map(|v| (self.lower_bound(v, n_trunc).unwrap_or(T::neg_infinity()), v))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("no NaN").then(a.1.cmp(&b.1)));
        let mut best: Option<(TreeExplosion<T>, Label)> = None;
        for (lb, v) in order {
            if let Some((b, _)) = &best {
                if lb > b.mid {
                    break;
                }
            }
            let cand = self.vertex_estimate(v, n_trunc, tail, delta);
            let label = self.tree.label(v);
            if best.as_ref().is_none_or(|(b, bl)| (cand.mid, &label) < (b.mid, bl)) {
                best = Some((cand, label));
            }
        }
        best.expect("tree is non-empty").0
    }

    /// Maintains the tree explosion estimate incrementally from now on.
    pub fn enable_explosion_tracking(&mut self, n_trunc: usize, confidence: f64) -> Result<()> {
        let tail = self.kernel().tail_mean(n_trunc)?;
        let (delta, _) = deviation_delta(self.kernel(), n_trunc, confidence)?;
        let best = self.scan_minimum(n_trunc, tail, delta);
        self.tracker = Some(Tracker { n_trunc, tail, delta, best });
        Ok(())
    }

    pub fn tracked_explosion(&self) -> Option<TreeExplosion<T>> {
        self.tracker.as_ref().map(|t| t.best)
    }

    /// Recomputes every birth time and pending event from the clocks and compares
    /// them bit-for-bit with the stored values.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        self.tree.check_invariants()?;
        let kernel = self.kernel();
        for v in 0..self.tree.size() {
            if self.keys[v] != self.clocks.key(&self.tree.label(v)) {
                return Err(format!("vertex {v}: clock key mismatch"));
            }
            let mut acc = self.birth[v];
            for (j, &c) in self.tree.children(v).iter().enumerate() {
                acc = acc + ClockSource::clock(self.keys[v], j as u64, kernel.eval(j));
                if acc != self.birth[c as usize] {
                    return Err(format!("vertex {c}: birth time mismatch"));
                }
                if !(self.birth[c as usize] > self.birth[v]) {
                    return Err(format!("vertex {c} not born after its parent"));
                }
            }
            let d = self.tree.deg(v);
            acc = acc + ClockSource::clock(self.keys[v], d as u64, kernel.eval(d));
            if acc != self.next_event[v] {
                return Err(format!("vertex {v}: pending event mismatch"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    Births { m: usize },
    WallTime { t: f64 },
    /// Stop once `now >= S_hat * (1 - rel_delta)`, or after `max_births` births.
    NearExplosion {
        #[serde(default = "default_rel_delta")]
        rel_delta: f64,
        #[serde(default = "default_n_trunc")]
        n_trunc: usize,
        #[serde(default = "default_max_births")]
        max_births: usize,
    },
}

fn default_rel_delta() -> f64 {
    1e-4
}

fn default_n_trunc() -> usize {
    10_000
}

fn default_max_births() -> usize {
    10_000_000
}

impl StopRule {
    pub fn near_explosion() -> Self {
        Self::NearExplosion { rel_delta: default_rel_delta(), n_trunc: default_n_trunc(), max_births: default_max_births() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BirthsReached,
    WallTimeReached,
    NearExplosion,
    BirthCap,
}

/// Confidence used for the explosion interval behind the near-explosion stop rule.
pub const NEAR_EXPLOSION_CONFIDENCE: f64 = 0.99;

pub fn run_embedded<T: Scalar>(kernel: &Kernel<T>, stop: StopRule, clocks: ClockSource) -> Result<(EmbedState<T>, StopReason)> {
    let mut state = EmbedState::new(kernel.clone(), clocks)?;
    let reason = state.run_until(stop, |_| Ok(()))?;
    Ok((state, reason))
}

impl<T: Scalar> EmbedState<T> {
    /// Advances until `stop` fires, calling `on_birth` after every birth. Birth
    /// counts in the rule are totals, not increments.
    pub fn run_until<F>(&mut self, stop: StopRule, mut on_birth: F) -> Result<StopReason>
    where
        F: FnMut(&Self) -> Result<()>,
    {
        match stop {
            StopRule::Births { m } => {
                while self.births() < m {
                    self.next_birth()?;
                    on_birth(self)?;
                }
                Ok(StopReason::BirthsReached)
            }
            StopRule::WallTime { t } => {
                let t = T::lit(t);
                while self.peek_time().is_some_and(|x| x <= t) {
                    self.next_birth()?;
                    on_birth(self)?;
                }
                Ok(StopReason::WallTimeReached)
            }
            StopRule::NearExplosion { rel_delta, n_trunc, max_births } => {
                if !self.kernel().is_explosive() {
                    return Err(Error::InvalidArgument("near-explosion stop needs an explosive kernel".into()));
                }
                if self.tracker.as_ref().is_none_or(|t| t.n_trunc != n_trunc) {
                    self.enable_explosion_tracking(n_trunc, NEAR_EXPLOSION_CONFIDENCE)?;
                }
                let factor = T::one() - T::lit(rel_delta);
                loop {
                    let s_hat = self.tracked_explosion().expect("tracking enabled").mid;
                    if self.now() >= s_hat * factor {
                        return Ok(StopReason::NearExplosion);
                    }
                    if self.births() >= max_births {
                        return Ok(StopReason::BirthCap);
                    }
                    self.next_birth()?;
                    on_birth(self)?;
                }
            }
        }
    }

    /// Birth-time trace as CSV with columns `index,label,birth_time`.
    pub fn birth_times_csv(&self) -> String {
        let mut out = String::from("index,label,birth_time\n");
        for (v, b) in self.birth.iter().enumerate() {
            out.push_str(&format!("{v},{},{b}\n", self.tree.label(v)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Discrete,
    Embedded,
}

const BINS_DOMAIN: u64 = 0xB1B5;

/// Balls-in-bins with feedback `f`, discrete chain.
pub fn balls_in_bins_discrete<T: Scalar, R: Rng + ?Sized>(feedback: &Kernel<T>, bins: usize, balls: usize, rng: &mut R) -> Result<Vec<u64>> {
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least two bins".into()));
    }
    let mut rates = RateTable::new(feedback.clone());
    let mut occ = vec![0u64; bins];
    for _ in 0..balls {
        let ws = occ.iter().map(|&n| rates.rate(n as usize)).collect::<Result<Vec<T>>>()?;
        let total = ws.iter().fold(T::zero(), |a, &w| a + w);
        let target = T::lit(rng.gen::<f64>()) * total;
        let mut acc = T::zero();
        let mut pick = bins - 1;
        for (i, &w) in ws.iter().enumerate() {
            acc = acc + w;
            if target < acc {
                pick = i;
                break;
            }
        }
        occ[pick] += 1;
    }
    Ok(occ)
}

/// Balls-in-bins realized by racing per-bin clock chains `X_i(j) ~ exp(f(j))`.
pub fn balls_in_bins_embedded<T: Scalar>(feedback: &Kernel<T>, bins: usize, balls: usize, clocks: &ClockSource) -> Result<Vec<u64>> {
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least two bins".into()));
    }
    let mut rates = RateTable::new(feedback.clone());
    let keys: Vec<u64> = (0..bins as u64).map(|i| clocks.stream_key(&[BINS_DOMAIN, i])).collect();
    let mut occ = vec![0u64; bins];
    let mut next: Vec<T> = Vec::with_capacity(bins);
    for &k in &keys {
        next.push(ClockSource::clock(k, 0, rates.rate(0)?));
    }
    for _ in 0..balls {
        let (i, t) = next
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("no NaN").then(a.0.cmp(&b.0)))
            .expect("bins >= 2");
        occ[i] += 1;
        let n = occ[i] as usize;
        next[i] = t + ClockSource::clock(keys[i], n as u64, rates.rate(n)?);
    }
    Ok(occ)
}

/// One balls-in-bins trial with its randomness derived from `seed`.
pub fn balls_in_bins_run<T: Scalar>(feedback: &Kernel<T>, bins: usize, balls: usize, mode: Mode, seed: u64) -> Result<Vec<u64>> {
    match mode {
        Mode::Discrete => balls_in_bins_discrete(feedback, bins, balls, &mut crate::rng::trial_rng(seed, 0)),
        Mode::Embedded => balls_in_bins_embedded(feedback, bins, balls, &ClockSource::new(seed)),
    }
}
