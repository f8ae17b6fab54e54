use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vertex label: a finite sequence of positive integers. The empty sequence is the root.
///
/// The derived order is lexicographic on the path, which is the tie-break order used
/// throughout the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Label(Vec<u32>);

impl Label {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_path(path: Vec<u32>) -> Result<Self> {
        if path.contains(&0) {
            return Err(Error::InvalidLabel(format!("{path:?} contains 0")));
        }
        Ok(Self(path))
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn parent(&self) -> Option<Label> {
        let (_, init) = self.0.split_last()?;
        Some(Self(init.to_vec()))
    }

    /// `a·i`; panics if `i == 0`.
    pub fn child(&self, i: u32) -> Label {
        assert!(i >= 1, "child index starts at 1");
        let mut path = Vec::with_capacity(self.0.len() + 1);
        path.extend_from_slice(&self.0);
        path.push(i);
        Self(path)
    }
}

impl TryFrom<Vec<u32>> for Label {
    type Error = Error;

    fn try_from(path: Vec<u32>) -> Result<Self> {
        Self::from_path(path)
    }
}

impl From<Label> for Vec<u32> {
    fn from(l: Label) -> Self {
        l.0
    }
}

/// Root prints as `ε`, other labels as dot-separated paths (`1.1` is the first child of `1`).
impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "e" {
            return Ok(Self::root());
        }
        let path = s
            .split('.')
            .map(|t| t.parse::<u32>().map_err(|e| Error::InvalidLabel(format!("{s}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_path(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_and_child() {
        let a: Label = "2.1.3".parse().unwrap();
        assert_eq!(a.parent().unwrap().to_string(), "2.1");
        assert_eq!(a.depth(), 3);
        assert!(Label::root().parent().is_none());
        assert_eq!(Label::root().child(1).child(1).to_string(), "1.1");
        assert_eq!("ε".parse::<Label>().unwrap(), Label::root());
        assert!("1.0".parse::<Label>().is_err());
        assert!("x".parse::<Label>().is_err());
    }

    #[test]
    fn lexicographic_order() {
        let mut v: Vec<Label> = ["2", "1.1", "ε", "1", "10", "1.2"].iter().map(|s| s.parse().unwrap()).collect();
        v.sort();
        let s: Vec<String> = v.iter().map(|l| l.to_string()).collect();
        assert_eq!(s, ["ε", "1", "1.1", "1.2", "2", "10"]);
    }
}
