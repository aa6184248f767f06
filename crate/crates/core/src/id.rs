use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A Lamport timestamp identifying one operation.
///
/// Ordering is lexicographic: counters first, then node identifiers compared
/// bytewise. The derived `Ord` relies on the field order below, and `String`
/// compares its UTF-8 bytes, so no manual impl is needed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpId {
    pub counter: u64,
    pub node: String,
}

impl OpId {
    pub fn new(counter: u64, node: impl Into<String>) -> Self {
        OpId {
            counter,
            node: node.into(),
        }
    }

    /// The reserved root identifier `(0, "")`, smaller than every generated
    /// identifier because generated counters start at 1.
    pub fn root() -> Self {
        OpId {
            counter: 0,
            node: String::new(),
        }
    }

    pub fn is_root(&self) -> bool {
        self.counter == 0 && self.node.is_empty()
    }
}

impl fmt::Debug for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{:?})", self.counter, self.node)
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.counter, self.node)
    }
}

/// Total order on identifiers.
pub fn compare_ids(a: &OpId, b: &OpId) -> Ordering {
    a.cmp(b)
}
