//! The discrete-time labelled GN chain: each arrival attaches to an existing vertex
//! `a` with probability `f(deg(a)) / sum_b f(deg(b))`.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, RateTable};
use crate::sampler::WeightTable;
use crate::scalar::Scalar;
use crate::tree::LabelledTree;

static RATE_BOUND_CHECKS: AtomicU64 = AtomicU64::new(0);
static RATE_BOUND_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide tally of `(checks, violations)` of `sum_b f(deg(b)) <= (n+1) f(n)`,
/// asserted after every birth of every discrete or embedded trajectory.
pub fn rate_bound_stats() -> (u64, u64) {
    (RATE_BOUND_CHECKS.load(Ordering::Relaxed), RATE_BOUND_VIOLATIONS.load(Ordering::Relaxed))
}

/// Checks the total attachment rate after `births` births against `(births+1) f(births)`.
pub(crate) fn check_rate_bound<T: Scalar>(total: T, births: usize, rates: &mut RateTable<T>) -> Result<bool> {
    let bound = T::from_count(births + 1) * rates.rate(births)?;
    RATE_BOUND_CHECKS.fetch_add(1, Ordering::Relaxed);
    let ok = total <= bound;
    if !ok {
        RATE_BOUND_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
        log::error!("rate bound violated after {births} births: {total} > {bound}");
    }
    Ok(ok)
}

/// One transition: vertex `new_vertex` was born as a child of `attached_to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub attached_to: usize,
    pub new_vertex: usize,
}

#[derive(Debug, Clone)]
pub struct GnState<T> {
    tree: LabelledTree,
    rates: RateTable<T>,
    weights: WeightTable<T>,
    total_weight: T,
    violations: u64,
}

impl<T: Scalar> GnState<T> {
    pub fn new(kernel: Kernel<T>) -> Result<Self> {
        Self::from_tree(kernel, LabelledTree::new())
    }

    /// Starts the chain from an arbitrary finite tree.
    pub fn from_tree(kernel: Kernel<T>, tree: LabelledTree) -> Result<Self> {
        let mut rates = RateTable::new(kernel);
        let mut weights = WeightTable::default();
        for v in 0..tree.size() {
            weights.push(rates.rate(tree.deg(v))?);
        }
        let total_weight = weights.recomputed_total();
        Ok(Self { tree, rates, weights, total_weight, violations: 0 })
    }

    pub fn with_sampler_threshold(mut self, threshold: usize) -> Self {
        let mut w = WeightTable::with_threshold(threshold);
        for i in 0..self.weights.len() {
            w.push(self.weights.weight(i));
        }
        self.weights = w;
        self
    }

    pub fn tree(&self) -> &LabelledTree {
        &self.tree
    }

    pub fn into_tree(self) -> LabelledTree {
        self.tree
    }

    pub fn kernel(&self) -> &Kernel<T> {
        self.rates.kernel()
    }

    pub fn births(&self) -> usize {
        self.tree.size() - 1
    }

    /// Cached normalizer `sum_b f(deg(b))`.
    pub fn total_weight(&self) -> T {
        self.total_weight
    }

    pub fn recomputed_total_weight(&self) -> T {
        (0..self.tree.size()).map(|v| self.kernel().eval(self.tree.deg(v))).fold(T::zero(), |a, w| a + w)
    }

    /// Cache coherence of the normalizer within relative `rel_tol`.
    pub fn cache_coherent(&self, rel_tol: f64) -> bool {
        let fresh = self.recomputed_total_weight();
        ((self.total_weight - fresh).abs() / fresh).as_f64() <= rel_tol
    }

    /// Rate-bound violations seen by this state.
    pub fn violations(&self) -> u64 {
        self.violations
    }

    /// Probability that the next arrival attaches to vertex `v`.
    pub fn attach_probability(&self, v: usize) -> T {
        self.weights.weight(v) / self.total_weight
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepRecord> {
        let u = T::lit(rng.gen::<f64>());
        let a = self.weights.sample(u);
        let d = self.tree.deg(a);
        let (old, new, fresh) = (self.rates.rate(d)?, self.rates.rate(d + 1)?, self.rates.rate(0)?);
        let v = self.tree.add_child_at(a);
        self.weights.set(a, new);
        self.weights.push(fresh);
        self.total_weight = self.total_weight + new - old + fresh;
        if !self.total_weight.is_finite() {
            return Err(Error::RateOverflow(d + 1));
        }
        if !check_rate_bound(self.total_weight, self.births(), &mut self.rates)? {
            self.violations += 1;
        }
        Ok(StepRecord { attached_to: a, new_vertex: v })
    }
}

/// Runs `m` steps from `{ε}` and returns `T_m` with its attachment log.
pub fn run<T: Scalar, R: Rng + ?Sized>(kernel: &Kernel<T>, m: usize, rng: &mut R) -> Result<(LabelledTree, AttachmentLog)> {
    let mut state = GnState::new(kernel.clone())?;
    let mut log = AttachmentLog::with_capacity(m);
    for _ in 0..m {
        log.push(state.step(rng)?.attached_to);
    }
    Ok((state.into_tree(), log))
}

/// The sequence of attachment targets; entry `i` is the parent index of vertex `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttachmentLog {
    attached_to: Vec<u32>,
}

const LOG_MAGIC: &[u8; 8] = b"GNLOG001";

impl AttachmentLog {
    pub fn with_capacity(n: usize) -> Self {
        Self { attached_to: Vec::with_capacity(n) }
    }

    pub fn push(&mut self, attached_to: usize) {
        self.attached_to.push(u32::try_from(attached_to).expect("index fits in u32"));
    }

    pub fn len(&self) -> usize {
        self.attached_to.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attached_to.is_empty()
    }

    pub fn entries(&self) -> &[u32] {
        &self.attached_to
    }

    pub fn replay(&self) -> Result<LabelledTree> {
        let mut t = LabelledTree::with_capacity(self.len() + 1);
        for (i, &a) in self.attached_to.iter().enumerate() {
            if a as usize > i {
                return Err(Error::Parse(format!("step {}: vertex {a} not yet born", i + 1)));
            }
            t.add_child_at(a as usize);
        }
        Ok(t)
    }

    /// Text form: one `step attached_to_index` line per birth, steps numbered from 1.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 12);
        for (i, a) in self.attached_to.iter().enumerate() {
            s.push_str(&format!("{} {}\n", i + 1, a));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut log = Self::default();
        for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Parse(format!("line {}: {line:?}", lineno + 1));
            let mut it = line.split_whitespace();
            let step: usize = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let a: u32 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if step != log.len() + 1 || it.next().is_some() {
                return Err(bad());
            }
            log.attached_to.push(a);
        }
        Ok(log)
    }

    /// Binary form: magic `GNLOG001`, little-endian `u64` count, then `u32` entries.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.len());
        out.extend_from_slice(LOG_MAGIC);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for a in &self.attached_to {
            out.extend_from_slice(&a.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != LOG_MAGIC {
            return Err(Error::Parse("not an attachment log".into()));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() != n.checked_mul(4).ok_or_else(|| Error::Parse("bad count".into()))? {
            return Err(Error::Parse("truncated attachment log".into()));
        }
        let attached_to = body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Self { attached_to })
    }
}
