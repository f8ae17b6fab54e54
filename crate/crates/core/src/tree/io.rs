//! Tree serialization: a newline-delimited parent array (`index parent_index`, the
//! root's parent is `-1`) and a JSON document listing labels in birth order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Label, LabelledTree};
use crate::error::{Error, Result};

pub fn to_parent_text(tree: &LabelledTree) -> String {
    let mut s = String::with_capacity(tree.size() * 12);
    for (v, p) in tree.parent_array().into_iter().enumerate() {
        match p {
            Some(p) => writeln!(s, "{v} {p}"),
            None => writeln!(s, "{v} -1"),
        }
        .expect("writing to a String");
    }
    s
}

pub fn from_parent_text(text: &str) -> Result<LabelledTree> {
    let mut parents = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let bad = || Error::Parse(format!("line {}: expected `index parent_index`, got {line:?}", lineno + 1));
        let idx: usize = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let parent: i64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if it.next().is_some() || idx != parents.len() {
            return Err(bad());
        }
        parents.push(if parent < 0 { None } else { Some(parent as usize) });
    }
    LabelledTree::from_parent_array(&parents)
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeJson {
    size: usize,
    /// Labels in birth order; each label is its integer path.
    labels: Vec<Label>,
}

pub fn to_json(tree: &LabelledTree) -> String {
    serde_json::to_string(&TreeJson { size: tree.size(), labels: tree.labels() }).expect("tree serializes")
}

/// Rebuilds a tree from its JSON label list. Each label's parent must appear earlier and
/// the label must be the next free child slot of that parent.
pub fn from_json(json: &str) -> Result<LabelledTree> {
    let doc: TreeJson = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.labels.len() != doc.size || doc.labels.first().map(Label::is_root) != Some(true) {
        return Err(Error::Parse("label list must start with the root and match size".into()));
    }
    let mut tree = LabelledTree::with_capacity(doc.size);
    for l in &doc.labels[1..] {
        let parent = l.parent().expect("non-root label");
        let got = tree.add_child(&parent)?;
        if &got != l {
            return Err(Error::Parse(format!("label {l} is not the next child of {parent} (expected {got})")));
        }
    }
    Ok(tree)
}
