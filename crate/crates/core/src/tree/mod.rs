//! Labelled rooted trees as parent-closed label sets.
//!
//! Vertices are stored by birth index (the root is 0, and every vertex is born
//! after its parent). A vertex's label is recovered from the chain of sibling
//! ranks up to the root, so the label set is parent-closed and contiguous
//! (`a·i` exists iff `1 <= i <= deg(a)`) by construction.

mod glue;
pub mod io;
mod label;
mod shape;

pub use glue::{glue_construct, glue_decompose, GlueDecomposition};
pub use label::Label;
pub use shape::{enumerate_shapes, Shape};

use crate::error::{Error, Result};

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledTree {
    parent: Vec<u32>,
    /// 1-based position among the parent's children.
    rank: Vec<u32>,
    children: Vec<Vec<u32>>,
}

impl Default for LabelledTree {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelledTree {
    /// The single-vertex tree `{ε}`.
    pub fn new() -> Self {
        Self { parent: vec![NO_PARENT], rank: vec![0], children: vec![Vec::new()] }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut t = Self {
            parent: Vec::with_capacity(n),
            rank: Vec::with_capacity(n),
            children: Vec::with_capacity(n),
        };
        t.parent.push(NO_PARENT);
        t.rank.push(0);
        t.children.push(Vec::new());
        t
    }

    pub fn size(&self) -> usize {
        self.parent.len()
    }

    pub fn deg(&self, v: usize) -> usize {
        self.children[v].len()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    pub fn children(&self, v: usize) -> &[u32] {
        &self.children[v]
    }

    /// Index of `a·(deg(a)+1)` after [`add_child_at`](Self::add_child_at)`(a)`.
    pub fn add_child_at(&mut self, a: usize) -> usize {
        assert!(a < self.size(), "vertex index {a} out of range");
        let v = self.size();
        let idx = u32::try_from(v).expect("tree size fits in u32");
        self.children[a].push(idx);
        self.parent.push(a as u32);
        self.rank.push(self.children[a].len() as u32);
        self.children.push(Vec::new());
        #[cfg(debug_assertions)]
        debug_assert!(self.local_invariants_hold(v));
        v
    }

    /// Adds `a·(deg(a)+1)` and returns its label.
    pub fn add_child(&mut self, a: &Label) -> Result<Label> {
        let idx = self.index_of(a).ok_or_else(|| Error::UnknownVertex(a.to_string()))?;
        let v = self.add_child_at(idx);
        Ok(a.child(self.rank[v]))
    }

    pub fn label(&self, mut v: usize) -> Label {
        let mut path = Vec::new();
        while let Some(p) = self.parent(v) {
            path.push(self.rank[v]);
            v = p;
        }
        path.reverse();
        Label::from_path(path).expect("ranks are positive")
    }

    pub fn index_of(&self, a: &Label) -> Option<usize> {
        let mut v = 0usize;
        for &i in a.path() {
            v = *self.children[v].get((i as usize).checked_sub(1)?)? as usize;
        }
        Some(v)
    }

    pub fn contains(&self, a: &Label) -> bool {
        self.index_of(a).is_some()
    }

    /// All labels in birth order.
    pub fn labels(&self) -> Vec<Label> {
        (0..self.size()).map(|v| self.label(v)).collect()
    }

    pub fn depth(&self, mut v: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent(v) {
            d += 1;
            v = p;
        }
        d
    }

    pub fn height(&self) -> usize {
        let mut depth = vec![0usize; self.size()];
        for v in 1..self.size() {
            depth[v] = depth[self.parent[v] as usize] + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Subtree sizes (vertex included) for every vertex, in one reverse pass.
    pub fn subtree_sizes(&self) -> Vec<u32> {
        let mut size = vec![1u32; self.size()];
        for v in (1..self.size()).rev() {
            let p = self.parent[v] as usize;
            size[p] += size[v];
        }
        size
    }

    /// Vertices of the subtree rooted at `v`, in birth order.
    pub fn subtree_vertices(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().map(|&c| c as usize));
            i += 1;
        }
        out.sort_unstable();
        out
    }

    pub fn descendant_count(&self, a: &Label) -> Result<usize> {
        let v = self.index_of(a).ok_or_else(|| Error::UnknownVertex(a.to_string()))?;
        Ok(self.subtree_vertices(v).len() - 1)
    }

    /// `a` has at least `k` descendants.
    pub fn is_k_fertile(&self, a: &Label, k: usize) -> Result<bool> {
        Ok(self.descendant_count(a)? >= k)
    }

    /// `hist[d]` = number of vertices of in-degree `d`.
    pub fn degree_histogram(&self) -> Vec<u64> {
        let max = self.children.iter().map(Vec::len).max().unwrap_or(0);
        let mut hist = vec![0u64; max + 1];
        for c in &self.children {
            hist[c.len()] += 1;
        }
        hist
    }

    /// Vertex of maximum in-degree; ties go to the lexicographically smallest label.
    pub fn max_degree_vertex(&self) -> usize {
        let max = self.children.iter().map(Vec::len).max().unwrap_or(0);
        let mut best: Option<(usize, Label)> = None;
        for v in (0..self.size()).filter(|&v| self.deg(v) == max) {
            let l = self.label(v);
            if best.as_ref().is_none_or(|(_, b)| l < *b) {
                best = Some((v, l));
            }
        }
        best.expect("tree is non-empty").0
    }

    /// Copy of the subtree rooted at `v`, relabelled with `v` as the root.
    pub fn subtree(&self, v: usize) -> LabelledTree {
        let verts = self.subtree_vertices(v);
        let mut out = LabelledTree::with_capacity(verts.len());
        let mut map = std::collections::HashMap::with_capacity(verts.len());
        map.insert(v, 0usize);
        for &u in &verts[1..] {
            let p = map[&(self.parent[u] as usize)];
            map.insert(u, out.add_child_at(p));
        }
        out
    }

    /// Parent index of every vertex (`None` for the root), in birth order.
    pub fn parent_array(&self) -> Vec<Option<usize>> {
        (0..self.size()).map(|v| self.parent(v)).collect()
    }

    /// Builds a tree from a parent array. Parents must precede their children; siblings
    /// are ranked in index order.
    pub fn from_parent_array(parents: &[Option<usize>]) -> Result<Self> {
        match parents.first() {
            Some(None) => {}
            _ => return Err(Error::Parse("vertex 0 must be the root".into())),
        }
        let mut t = Self::with_capacity(parents.len());
        for (v, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < v => {
                    t.add_child_at(*p);
                }
                _ => return Err(Error::Parse(format!("vertex {v}: parent {p:?} must be an earlier vertex"))),
            }
        }
        Ok(t)
    }

    /// Full structural check: parent-closure, contiguity, rank consistency and the
    /// edge count identity `sum deg = size - 1`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.parent.first() != Some(&NO_PARENT) {
            return Err("vertex 0 is not a root".into());
        }
        if self.parent.len() != self.rank.len() || self.parent.len() != self.children.len() {
            return Err("column length mismatch".into());
        }
        for v in 1..self.size() {
            if !self.local_invariants_hold(v) {
                return Err(format!("vertex {v} inconsistent"));
            }
        }
        let edges: usize = self.children.iter().map(Vec::len).sum();
        if edges + 1 != self.size() {
            return Err(format!("sum of degrees {edges} != size - 1"));
        }
        Ok(())
    }

    fn local_invariants_hold(&self, v: usize) -> bool {
        let p = self.parent[v];
        if p == NO_PARENT || p as usize >= v {
            return false;
        }
        let r = self.rank[v] as usize;
        r >= 1 && self.children[p as usize].get(r - 1) == Some(&(v as u32))
    }
}
