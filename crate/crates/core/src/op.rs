use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::id::OpId;

/// A primitive value wrapped by `MakeVal`.
///
/// Floats compare bitwise, so `NaN == NaN` and `0.0 != -0.0`. This keeps
/// equality reflexive, which the OpSet uniqueness check depends on.
#[derive(Clone, Debug)]
pub enum PrimitiveValue {
    Str(String),
    Int(i64),
    Bool(bool),
    Null,
    F64(f64),
}

impl PartialEq for PrimitiveValue {
    fn eq(&self, other: &Self) -> bool {
        use PrimitiveValue::*;
        match (self, other) {
            (Str(a), Str(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Bool(a), Bool(b)) => a == b,
            (Null, Null) => true,
            (F64(a), F64(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for PrimitiveValue {}

impl Hash for PrimitiveValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            PrimitiveValue::Str(s) => s.hash(state),
            PrimitiveValue::Int(i) => i.hash(state),
            PrimitiveValue::Bool(b) => b.hash(state),
            PrimitiveValue::Null => {}
            PrimitiveValue::F64(f) => f.to_bits().hash(state),
        }
    }
}

impl From<&str> for PrimitiveValue {
    fn from(s: &str) -> Self {
        PrimitiveValue::Str(s.to_owned())
    }
}

impl From<String> for PrimitiveValue {
    fn from(s: String) -> Self {
        PrimitiveValue::Str(s)
    }
}

impl From<i64> for PrimitiveValue {
    fn from(i: i64) -> Self {
        PrimitiveValue::Int(i)
    }
}

impl From<bool> for PrimitiveValue {
    fn from(b: bool) -> Self {
        PrimitiveValue::Bool(b)
    }
}

impl From<f64> for PrimitiveValue {
    fn from(f: f64) -> Self {
        PrimitiveValue::F64(f)
    }
}

/// A user-chosen map key. Ordered by variant first (strings, then integers,
/// then booleans), then by value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MapKey {
    Str(String),
    Int(i64),
    Bool(bool),
}

impl From<&str> for MapKey {
    fn from(s: &str) -> Self {
        MapKey::Str(s.to_owned())
    }
}

impl From<i64> for MapKey {
    fn from(i: i64) -> Self {
        MapKey::Int(i)
    }
}

impl fmt::Display for MapKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKey::Str(s) => write!(f, "{s:?}"),
            MapKey::Int(i) => write!(f, "{i}"),
            MapKey::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// The key of an `Assign` or `Remove`: a map key for maps, the ID of a list
/// element for lists.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Key {
    Map(MapKey),
    Elem(OpId),
}

impl From<MapKey> for Key {
    fn from(k: MapKey) -> Self {
        Key::Map(k)
    }
}

impl From<OpId> for Key {
    fn from(id: OpId) -> Self {
        Key::Elem(id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operation {
    MakeMap,
    MakeList,
    MakeVal(PrimitiveValue),
    InsertAfter(OpId),
    Assign {
        obj: OpId,
        key: Key,
        val: OpId,
        prev: BTreeSet<OpId>,
    },
    Remove {
        obj: OpId,
        key: Key,
        prev: BTreeSet<OpId>,
    },
}

impl Operation {
    /// Every ID this operation mentions. In a valid OpSet all of them are
    /// strictly smaller than the operation's own ID.
    pub fn deps(&self) -> BTreeSet<&OpId> {
        let mut out = BTreeSet::new();
        match self {
            Operation::MakeMap | Operation::MakeList | Operation::MakeVal(_) => {}
            Operation::InsertAfter(r) => {
                out.insert(r);
            }
            Operation::Assign {
                obj,
                key,
                val,
                prev,
            } => {
                out.insert(obj);
                if let Key::Elem(k) = key {
                    out.insert(k);
                }
                out.insert(val);
                out.extend(prev.iter());
            }
            Operation::Remove { obj, key, prev } => {
                out.insert(obj);
                if let Key::Elem(k) = key {
                    out.insert(k);
                }
                out.extend(prev.iter());
            }
        }
        out
    }

    pub fn is_make(&self) -> bool {
        matches!(
            self,
            Operation::MakeMap | Operation::MakeList | Operation::MakeVal(_)
        )
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Operation::MakeMap => "MakeMap",
            Operation::MakeList => "MakeList",
            Operation::MakeVal(_) => "MakeVal",
            Operation::InsertAfter(_) => "InsertAfter",
            Operation::Assign { .. } => "Assign",
            Operation::Remove { .. } => "Remove",
        }
    }
}
