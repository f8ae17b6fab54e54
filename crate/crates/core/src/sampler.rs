//! Sampling an index with probability proportional to its weight.
//!
//! Small tables are scanned linearly; above a size threshold a complete binary sum
//! tree gives logarithmic update and sampling. Internal nodes are recomputed from
//! their children on every update, so the tree's totals never drift.

use crate::scalar::Scalar;

pub const DEFAULT_TREE_THRESHOLD: usize = 1024;

#[derive(Debug, Clone)]
struct SumTree<T> {
    cap: usize,
    nodes: Vec<T>,
}

impl<T: Scalar> SumTree<T> {
    fn build(weights: &[T], min_cap: usize) -> Self {
        let cap = min_cap.max(weights.len()).next_power_of_two().max(2);
        let mut nodes = vec![T::zero(); 2 * cap];
        nodes[cap..cap + weights.len()].copy_from_slice(weights);
        for i in (1..cap).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { cap, nodes }
    }

    fn set(&mut self, i: usize, w: T) {
        let mut n = self.cap + i;
        self.nodes[n] = w;
        while n > 1 {
            n /= 2;
            self.nodes[n] = self.nodes[2 * n] + self.nodes[2 * n + 1];
        }
    }

    fn total(&self) -> T {
        self.nodes[1]
    }

    fn sample(&self, u: T, len: usize) -> usize {
        let mut target = u * self.total();
        let mut n = 1;
        while n < self.cap {
            let left = self.nodes[2 * n];
            if target < left {
                n *= 2;
            } else {
                target = target - left;
                n = 2 * n + 1;
            }
        }
        let mut i = n - self.cap;
        // Rounding can walk past the last live leaf; fall back to the last positive weight.
        while i >= len || self.nodes[self.cap + i] <= T::zero() {
            i -= 1;
        }
        i
    }
}

#[derive(Debug, Clone)]
pub struct WeightTable<T> {
    weights: Vec<T>,
    total: T,
    tree: Option<SumTree<T>>,
    threshold: usize,
}

impl<T: Scalar> Default for WeightTable<T> {
    fn default() -> Self {
        Self::with_threshold(DEFAULT_TREE_THRESHOLD)
    }
}

impl<T: Scalar> WeightTable<T> {
    pub fn with_threshold(threshold: usize) -> Self {
        Self { weights: Vec::new(), total: T::zero(), tree: None, threshold }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    /// Running (incrementally maintained) total.
    pub fn total(&self) -> T {
        self.total
    }

    pub fn push(&mut self, w: T) {
        self.weights.push(w);
        self.total = self.total + w;
        let len = self.weights.len();
        match &mut self.tree {
            Some(t) if len <= t.cap => t.set(len - 1, w),
            Some(t) => *t = SumTree::build(&self.weights, 2 * t.cap),
            None if len > self.threshold => self.tree = Some(SumTree::build(&self.weights, 2 * len)),
            None => {}
        }
    }

    pub fn set(&mut self, i: usize, w: T) {
        self.total = self.total - self.weights[i] + w;
        self.weights[i] = w;
        if let Some(t) = &mut self.tree {
            t.set(i, w);
        }
    }

    /// Index drawn with probability `weight(i) / total` given `u` uniform on [0, 1).
    pub fn sample(&self, u: T) -> usize {
        assert!(!self.weights.is_empty(), "sampling from an empty table");
        if let Some(t) = &self.tree {
            return t.sample(u, self.weights.len());
        }
        let target = u * self.total;
        let mut acc = T::zero();
        for (i, &w) in self.weights.iter().enumerate() {
            acc = acc + w;
            if target < acc {
                return i;
            }
        }
        self.weights.iter().rposition(|&w| w > T::zero()).expect("some weight is positive")
    }

    pub fn recomputed_total(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &w| a + w)
    }
}
