use std::collections::BTreeMap;

use gnlab_core::analysis::fertility_census;
use gnlab_core::tree::{enumerate_shapes, glue_construct, glue_decompose, io, Label, LabelledTree, Shape};
use proptest::prelude::*;

fn tree_from_choices(choices: &[usize]) -> LabelledTree {
    let mut t = LabelledTree::new();
    for (i, &c) in choices.iter().enumerate() {
        t.add_child_at(c % (i + 1));
    }
    t
}

fn arb_tree(max: usize) -> impl Strategy<Value = LabelledTree> {
    prop::collection::vec(any::<usize>(), 0..max).prop_map(|c| tree_from_choices(&c))
}

/// Rooted isomorphism by trying every matching of children.
fn isomorphic(a: &LabelledTree, u: usize, b: &LabelledTree, w: usize) -> bool {
    let (cu, cw) = (a.children(u), b.children(w));
    if cu.len() != cw.len() {
        return false;
    }
    fn assign(a: &LabelledTree, cu: &[u32], b: &LabelledTree, cw: &[u32], used: &mut Vec<bool>, i: usize) -> bool {
        if i == cu.len() {
            return true;
        }
        for j in 0..cw.len() {
            if !used[j] && isomorphic(a, cu[i] as usize, b, cw[j] as usize) {
                used[j] = true;
                if assign(a, cu, b, cw, used, i + 1) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    assign(a, cu, b, cw, &mut vec![false; cw.len()], 0)
}

fn is_ancestor(a: &Label, b: &Label) -> bool {
    a.path().len() < b.path().len() && b.path().starts_with(a.path())
}

#[test]
fn canonical_code_matches_isomorphism_on_all_small_trees() {
    let mut trees = Vec::new();
    for n in 1..=6usize {
        let choices = n - 1;
        let total: usize = (1..=choices).product();
        for mut idx in 0..total.max(1) {
            let mut c = Vec::with_capacity(choices);
            for i in 0..choices {
                c.push(idx % (i + 1));
                idx /= i + 1;
            }
            trees.push(tree_from_choices(&c));
        }
    }
    let shapes: Vec<Shape> = trees.iter().map(|t| t.shape_at(0)).collect();
    for i in 0..trees.len() {
        for j in (i + 1)..trees.len() {
            if trees[i].size() != trees[j].size() {
                continue;
            }
            assert_eq!(shapes[i] == shapes[j], isomorphic(&trees[i], 0, &trees[j], 0), "{} vs {}", shapes[i].code(), shapes[j].code());
        }
    }
    let distinct: std::collections::BTreeSet<_> = shapes.iter().collect();
    assert_eq!(distinct.len(), 1 + 1 + 2 + 4 + 9 + 20);
    assert_eq!(enumerate_shapes(3).len(), 4);
}

#[test]
fn worked_tree_examples() {
    let mut t = LabelledTree::new();
    assert_eq!(t.add_child(&Label::root()).unwrap().to_string(), "1");
    let mut t2 = t.clone();
    assert_eq!(t2.add_child(&Label::root()).unwrap().to_string(), "2");
    assert_eq!(t.add_child(&"1".parse().unwrap()).unwrap().to_string(), "1.1");
    let one: Label = "1".parse().unwrap();
    assert_eq!(t.descendant_count(&one).unwrap(), 1);
    assert!(t.is_k_fertile(&one, 1).unwrap());
    assert!(!t.is_k_fertile(&one, 2).unwrap());
    assert!(t2.is_k_fertile(&Label::root(), 2).unwrap());
    assert!(t.add_child(&"5".parse().unwrap()).is_err());
    let path3 = t.canonical_shape(&Label::root()).unwrap();
    let cherry = t2.canonical_shape(&Label::root()).unwrap();
    assert_ne!(path3, cherry);
    assert_eq!(LabelledTree::new().canonical_shape(&Label::root()).unwrap().size(), 1);
}

#[test]
fn worked_glue_examples() {
    let g = glue_construct(&LabelledTree::new(), &Label::root(), 2, 2).unwrap();
    assert_eq!(g.deg(0), 4);
    let mut kids: Vec<usize> = g.children(0).iter().map(|&c| g.deg(c as usize)).collect();
    kids.sort();
    assert_eq!(kids, vec![0, 0, 1, 1]);
    let star = glue_construct(&LabelledTree::new(), &Label::root(), 1, 3).unwrap();
    assert_eq!((star.size(), star.deg(0)), (4, 3));
    let mut two = LabelledTree::new();
    two.add_child_at(0);
    let g = glue_construct(&two, &"1".parse().unwrap(), 1, 1).unwrap();
    assert_eq!(g.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>(), vec!["ε", "1", "1.1"]);

    let d = glue_decompose(&glue_construct(&LabelledTree::new(), &Label::root(), 1, 5).unwrap(), 1);
    assert_eq!((d.core.size(), d.v.is_root(), d.leftover), (1, true, 5));
    assert_eq!(d.inventory.values().copied().collect::<Vec<_>>(), vec![5]);
    let d = glue_decompose(&two, 2);
    assert!(d.v.is_root() && d.core.size() == 1);
    assert_eq!(d.inventory.get(&Shape::from_code("()").unwrap()), Some(&1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn census_matches_brute_force(t in arb_tree(50), k_max in 1usize..8) {
        let labels = t.labels();
        let census = fertility_census(&t, k_max);
        for k in 1..=k_max {
            let brute = labels
                .iter()
                .filter(|a| labels.iter().filter(|b| is_ancestor(a, b)).count() >= k)
                .count() as u64;
            prop_assert_eq!(census[&k], brute);
        }
    }

    #[test]
    fn invariants_and_io_round_trip(t in arb_tree(60)) {
        prop_assert!(t.check_invariants().is_ok());
        let degsum: usize = (0..t.size()).map(|v| t.deg(v)).sum();
        prop_assert_eq!(degsum, t.size() - 1);
        for a in t.labels() {
            if let Some(p) = a.parent() {
                prop_assert!(t.contains(&p));
            }
            let v = t.index_of(&a).unwrap();
            prop_assert!(!t.contains(&a.child(t.deg(v) as u32 + 1)));
        }
        let back = io::from_parent_text(&io::to_parent_text(&t)).unwrap();
        prop_assert_eq!(&back, &t);
        let back = io::from_json(&io::to_json(&t)).unwrap();
        prop_assert_eq!(back.labels(), t.labels());
    }

    #[test]
    fn shape_ignores_child_order(t in arb_tree(25)) {
        // Re-add children in reverse order through a relabelling.
        let mut rev = LabelledTree::new();
        let mut map = vec![0usize; t.size()];
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            for &c in t.children(v).iter().rev() {
                map[c as usize] = rev.add_child_at(map[v]);
                stack.push(c as usize);
            }
        }
        prop_assert_eq!(rev.shape_at(0), t.shape_at(0));
        prop_assert!(isomorphic(&rev, 0, &t, 0));
    }

    #[test]
    fn glue_round_trip(t in arb_tree(12), pick in any::<usize>(), k in 1usize..4, c in 1usize..4) {
        let v = pick % t.size();
        let label = t.label(v);
        let g = glue_construct(&t, &label, k, c).unwrap();
        let gv = g.index_of(&label).unwrap();
        prop_assume!((0..g.size()).all(|w| w == gv || g.deg(w) < g.deg(gv)));
        let d = glue_decompose(&g, k);
        prop_assert_eq!(&d.v, &label);
        let sizes = t.subtree_sizes();
        let mut expected: BTreeMap<Shape, u64> = enumerate_shapes(k).into_iter().map(|s| (s, c as u64)).collect();
        for &ch in t.children(v) {
            if sizes[ch as usize] as usize <= k {
                *expected.entry(t.shape_at(ch as usize)).or_default() += 1;
            }
        }
        prop_assert_eq!(&d.inventory, &expected);
        let weighted: u64 = d.inventory.iter().map(|(s, n)| s.size() as u64 * n).sum();
        prop_assert_eq!(weighted as usize, d.leftover);
        prop_assert_eq!(d.core.size() + d.leftover, g.size());
    }
}
