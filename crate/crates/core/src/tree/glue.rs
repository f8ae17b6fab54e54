use std::collections::BTreeMap;

use super::{enumerate_shapes, Label, LabelledTree, Shape};
use crate::error::{Error, Result};

/// `Glue(T, v, k)` truncated to `copies_per_shape` copies of every rooted tree on at
/// most `k` vertices, each attached by its root as a new child of `v`.
pub fn glue_construct(tree: &LabelledTree, v: &Label, k: usize, copies_per_shape: usize) -> Result<LabelledTree> {
    let at = tree.index_of(v).ok_or_else(|| Error::UnknownVertex(v.to_string()))?;
    if k == 0 || copies_per_shape == 0 {
        return Err(Error::InvalidArgument("k and copies_per_shape must be positive".into()));
    }
    let mut out = tree.clone();
    for shape in enumerate_shapes(k) {
        let template = shape.to_tree();
        for _ in 0..copies_per_shape {
            graft(&mut out, at, &template);
        }
    }
    Ok(out)
}

fn graft(tree: &mut LabelledTree, at: usize, template: &LabelledTree) {
    let mut map = Vec::with_capacity(template.size());
    map.push(tree.add_child_at(at));
    for u in 1..template.size() {
        let p = template.parent(u).expect("non-root has a parent");
        map.push(tree.add_child_at(map[p]));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlueDecomposition {
    /// What remains after detaching the small children subtrees of `v`, relabelled.
    pub core: LabelledTree,
    pub v: Label,
    /// Shapes of the detached children subtrees of `v` (each on at most `k` vertices).
    pub inventory: BTreeMap<Shape, u64>,
    /// Number of detached vertices.
    pub leftover: usize,
}

/// Takes the max-degree vertex `v` (lexicographic tie-break) as the exploder proxy and
/// detaches every child subtree of `v` with at most `k` vertices, tallying shapes.
pub fn glue_decompose(tree: &LabelledTree, k: usize) -> GlueDecomposition {
    let v = tree.max_degree_vertex();
    let sizes = tree.subtree_sizes();
    let mut inventory = BTreeMap::new();
    let mut detached = vec![false; tree.size()];
    let mut leftover = 0usize;
    for &c in tree.children(v) {
        let c = c as usize;
        if sizes[c] as usize <= k {
            *inventory.entry(tree.shape_at(c)).or_insert(0) += 1;
            leftover += sizes[c] as usize;
            detached[c] = true;
        }
    }
    let mut core = LabelledTree::with_capacity(tree.size() - leftover);
    let mut map = vec![usize::MAX; tree.size()];
    map[0] = 0;
    for u in 1..tree.size() {
        let p = tree.parent(u).expect("non-root");
        if detached[u] || map[p] == usize::MAX {
            continue;
        }
        map[u] = core.add_child_at(map[p]);
    }
    GlueDecomposition { v: core.label(map[v]), core, inventory, leftover }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construct_examples() {
        let root = Label::root();
        let g = glue_construct(&LabelledTree::new(), &root, 2, 2).unwrap();
        assert_eq!(g.deg(0), 4);
        let mut kid_degrees: Vec<usize> = g.children(0).iter().map(|&c| g.deg(c as usize)).collect();
        kid_degrees.sort();
        assert_eq!(kid_degrees, vec![0, 0, 1, 1]);
        assert_eq!(g.height(), 2);

        let star = glue_construct(&LabelledTree::new(), &root, 1, 3).unwrap();
        assert_eq!(star.size(), 4);
        assert_eq!(star.deg(0), 3);

        let mut t = LabelledTree::new();
        t.add_child_at(0);
        let one: Label = "1".parse().unwrap();
        let g = glue_construct(&t, &one, 1, 1).unwrap();
        assert_eq!(g.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>(), ["ε", "1", "1.1"]);
        assert!(glue_construct(&t, &"5".parse().unwrap(), 1, 1).is_err());
    }

    #[test]
    fn decompose_examples() {
        let star = glue_construct(&LabelledTree::new(), &Label::root(), 1, 5).unwrap();
        let d = glue_decompose(&star, 1);
        assert_eq!(d.core.size(), 1);
        assert_eq!(d.v, Label::root());
        assert_eq!(d.inventory.len(), 1);
        assert_eq!(d.inventory.values().copied().collect::<Vec<_>>(), vec![5]);
        assert_eq!(d.leftover, 5);

        let mut two = LabelledTree::new();
        two.add_child_at(0);
        let d = glue_decompose(&two, 2);
        assert_eq!(d.v, Label::root());
        assert_eq!(d.core.size(), 1);
        assert_eq!(d.inventory.get(&LabelledTree::new().shape_at(0)), Some(&1));
    }

    #[test]
    fn decompose_keeps_large_children() {
        let mut t = LabelledTree::new();
        let a = t.add_child_at(0);
        t.add_child_at(a);
        t.add_child_at(a);
        t.add_child_at(0);
        t.add_child_at(0);
        t.add_child_at(0);
        // root has 4 children; child 1 has 2 children (subtree size 3)
        let d = glue_decompose(&t, 2);
        assert_eq!(d.v, Label::root());
        assert_eq!(d.leftover, 3);
        assert_eq!(d.core.size(), 4);
        assert_eq!(d.core.deg(0), 1);
        let weighted: usize = d.inventory.iter().map(|(s, c)| s.size() * *c as usize).sum();
        assert_eq!(weighted, d.leftover);
    }
}
