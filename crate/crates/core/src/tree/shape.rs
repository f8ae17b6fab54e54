use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Label, LabelledTree};
use crate::error::{Error, Result};

/// A rooted tree up to isomorphism, encoded AHU-style: each vertex is `(` followed by
/// the sorted codes of its children and `)`.
///
/// Ordered by size first, then by code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Shape {
    size: usize,
    code: String,
}

impl Shape {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn from_code(code: &str) -> Result<Self> {
        let tree = Self::parse(code)?;
        let shape = tree.shape_at(0);
        if shape.code != code {
            return Err(Error::Parse(format!("{code} is not in canonical form")));
        }
        Ok(shape)
    }

    /// A labelled representative of this shape.
    pub fn to_tree(&self) -> LabelledTree {
        Self::parse(&self.code).expect("shape codes are well formed")
    }

    fn parse(code: &str) -> Result<LabelledTree> {
        let bytes = code.as_bytes();
        if bytes.first() != Some(&b'(') {
            return Err(Error::Parse(format!("bad shape code {code:?}")));
        }
        let mut tree = LabelledTree::new();
        let mut stack = vec![0usize];
        for (i, &b) in bytes.iter().enumerate().skip(1) {
            match b {
                b'(' => {
                    let top = *stack.last().ok_or_else(|| Error::Parse(format!("bad shape code {code:?}")))?;
                    stack.push(tree.add_child_at(top));
                }
                b')' => {
                    stack.pop();
                    if stack.is_empty() && i + 1 != bytes.len() {
                        return Err(Error::Parse(format!("trailing input in {code:?}")));
                    }
                }
                _ => return Err(Error::Parse(format!("bad character in {code:?}"))),
            }
        }
        if !stack.is_empty() {
            return Err(Error::Parse(format!("unbalanced shape code {code:?}")));
        }
        Ok(tree)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

impl LabelledTree {
    /// Canonical shape of the subtree rooted at vertex index `v`.
    pub fn shape_at(&self, v: usize) -> Shape {
        let verts = self.subtree_vertices(v);
        let mut codes: HashMap<usize, String> = HashMap::with_capacity(verts.len());
        for &u in verts.iter().rev() {
            let mut kids: Vec<String> = self.children(u).iter().map(|&c| codes.remove(&(c as usize)).expect("child coded first")).collect();
            kids.sort_unstable();
            let mut code = String::with_capacity(2 + kids.iter().map(String::len).sum::<usize>());
            code.push('(');
            kids.iter().for_each(|k| code.push_str(k));
            code.push(')');
            codes.insert(u, code);
        }
        Shape { size: verts.len(), code: codes.remove(&v).expect("root coded") }
    }

    pub fn canonical_shape(&self, a: &Label) -> Result<Shape> {
        let v = self.index_of(a).ok_or_else(|| Error::UnknownVertex(a.to_string()))?;
        Ok(self.shape_at(v))
    }
}

/// Every rooted tree with at most `max_size` vertices, ordered by (size, code).
pub fn enumerate_shapes(max_size: usize) -> Vec<Shape> {
    let mut all: BTreeSet<Shape> = BTreeSet::new();
    if max_size == 0 {
        return Vec::new();
    }
    let mut layer = vec![LabelledTree::new().shape_at(0)];
    all.extend(layer.iter().cloned());
    for _ in 2..=max_size {
        let mut next = BTreeSet::new();
        for s in &layer {
            let base = s.to_tree();
            for v in 0..base.size() {
                let mut t = base.clone();
                t.add_child_at(v);
                next.insert(t.shape_at(0));
            }
        }
        all.extend(next.iter().cloned());
        layer = next.into_iter().collect();
    }
    all.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_shapes() {
        let single = LabelledTree::new().shape_at(0);
        assert_eq!(single.code(), "()");
        assert_eq!(single.size(), 1);
        let mut path = LabelledTree::new();
        path.add_child_at(0);
        path.add_child_at(1);
        let mut cherry = LabelledTree::new();
        cherry.add_child_at(0);
        cherry.add_child_at(0);
        assert_ne!(path.shape_at(0), cherry.shape_at(0));
        assert_eq!(enumerate_shapes(3).len(), 4);
    }

    #[test]
    fn rooted_tree_counts() {
        // OEIS A000081: 1, 1, 2, 4, 9, 20, 48, 115
        let shapes = enumerate_shapes(8);
        let counts: Vec<usize> = (1..=8).map(|n| shapes.iter().filter(|s| s.size() == n).count()).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20, 48, 115]);
    }

    #[test]
    fn code_round_trip() {
        for s in enumerate_shapes(6) {
            assert_eq!(Shape::from_code(s.code()).unwrap(), s);
            assert_eq!(s.to_tree().shape_at(0), s);
        }
        assert!(Shape::from_code("(()").is_err());
        assert!(Shape::from_code("()()").is_err());
        assert!(Shape::from_code("(()(()))").is_err()); // not sorted
        assert!(Shape::from_code("x").is_err());
    }

    #[test]
    fn child_order_invariance() {
        let mut a = LabelledTree::new();
        a.add_child_at(0);
        a.add_child_at(0);
        a.add_child_at(1);
        let mut b = LabelledTree::new();
        b.add_child_at(0);
        b.add_child_at(0);
        b.add_child_at(2);
        assert_eq!(a.shape_at(0), b.shape_at(0));
        assert_eq!(a.canonical_shape(&Label::root()).unwrap(), a.shape_at(0));
    }
}
