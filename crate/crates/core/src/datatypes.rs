//! Maps, lists and registers interpreted over the element relation `E` and the
//! list relation `L`.
//!
//! `E` holds one tuple `(id, obj, key, val)` per surviving assignment. `L`
//! holds successor pairs: each list object's creation ID is the head of a
//! chain that runs through its elements and ends in [`Next::End`]. Removed
//! list elements stay in `L` as tombstones.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::id::OpId;
use crate::op::{Key, MapKey, Operation, PrimitiveValue};
use crate::opset::OpSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RegisterMode {
    /// Assignments drop only the tuples named in `prev`; concurrent values
    /// survive side by side.
    #[default]
    MultiValue,
    /// Assignments drop every tuple for the same `(obj, key)`.
    LastWriterWins,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element {
    pub obj: OpId,
    pub key: Key,
    pub val: OpId,
}

/// `E`, keyed by the ID of the assignment that produced each tuple.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ElementRelation {
    tuples: BTreeMap<OpId, Element>,
}

impl ElementRelation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn insert(&mut self, id: OpId, element: Element) {
        self.tuples.insert(id, element);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OpId, &Element)> + '_ {
        self.tuples.iter()
    }

    pub fn get(&self, id: &OpId) -> Option<&Element> {
        self.tuples.get(id)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&OpId, &Element) -> bool) {
        self.tuples.retain(|id, e| keep(id, e));
    }

    /// IDs of the assignments currently holding a value for `(obj, key)`.
    pub fn assignments(&self, obj: &OpId, key: &Key) -> BTreeSet<OpId> {
        self.tuples
            .iter()
            .filter(|(_, e)| &e.obj == obj && &e.key == key)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn has_value(&self, obj: &OpId, key: &Key) -> bool {
        self.tuples
            .values()
            .any(|e| &e.obj == obj && &e.key == key)
    }

    /// Values for `(obj, key)` as `(assignment, value)` pairs, newest first.
    pub fn slot(&self, obj: &OpId, key: &Key) -> Vec<(&OpId, &OpId)> {
        self.tuples
            .iter()
            .rev()
            .filter(|(_, e)| &e.obj == obj && &e.key == key)
            .map(|(id, e)| (id, &e.val))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Next {
    Elem(OpId),
    End,
}

/// `L`, functional in its first component.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ListRelation {
    pairs: BTreeMap<OpId, Next>,
}

impl ListRelation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn next(&self, prev: &OpId) -> Option<&Next> {
        self.pairs.get(prev)
    }

    pub fn insert(&mut self, prev: OpId, next: Next) {
        self.pairs.insert(prev, next);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OpId, &Next)> + '_ {
        self.pairs.iter()
    }

    pub fn contains(&self, prev: &OpId) -> bool {
        self.pairs.contains_key(prev)
    }

    /// The chain from `list` to the end marker, excluding `list` itself.
    pub fn chain(&self, list: &OpId) -> Result<Vec<OpId>, ListError> {
        let mut cur = self
            .pairs
            .get(list)
            .ok_or_else(|| ListError::NotAList(list.clone()))?;
        let mut seen = BTreeSet::from([list]);
        let mut out = Vec::new();
        while let Next::Elem(id) = cur {
            if !seen.insert(id) {
                return Err(ListError::Cycle(id.clone()));
            }
            out.push(id.clone());
            cur = self
                .pairs
                .get(id)
                .ok_or_else(|| ListError::BrokenChain(id.clone()))?;
        }
        Ok(out)
    }
}

impl FromIterator<(OpId, Next)> for ListRelation {
    fn from_iter<T: IntoIterator<Item = (OpId, Next)>>(iter: T) -> Self {
        ListRelation {
            pairs: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ListError {
    #[error("{0:?} is not a list object")]
    NotAList(OpId),
    #[error("list chain revisits {0:?}")]
    Cycle(OpId),
    #[error("list chain has no successor entry for {0:?}")]
    BrokenChain(OpId),
    #[error("index {index} out of range for list of visible length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocState {
    pub elements: ElementRelation,
    pub list: ListRelation,
    pub mode: RegisterMode,
}

impl DocState {
    pub fn new(mode: RegisterMode) -> Self {
        DocState {
            mode,
            ..Default::default()
        }
    }

    pub fn apply_op(&mut self, id: &OpId, op: &Operation) {
        match op {
            Operation::MakeMap | Operation::MakeVal(_) => {}
            Operation::MakeList => self.list.insert(id.clone(), Next::End),
            Operation::InsertAfter(r) => self.insert_after(id, r),
            Operation::Assign {
                obj,
                key,
                val,
                prev,
            } => {
                match self.mode {
                    RegisterMode::MultiValue => self.elements.retain(|i, _| !prev.contains(i)),
                    RegisterMode::LastWriterWins => self
                        .elements
                        .retain(|_, e| &e.obj != obj || &e.key != key),
                }
                self.elements.insert(
                    id.clone(),
                    Element {
                        obj: obj.clone(),
                        key: key.clone(),
                        val: val.clone(),
                    },
                );
            }
            Operation::Remove { prev, .. } => self.elements.retain(|i, _| !prev.contains(i)),
        }
    }

    pub(crate) fn insert_after(&mut self, id: &OpId, reference: &OpId) {
        if let Some(next) = self.list.next(reference).cloned() {
            self.list.insert(reference.clone(), Next::Elem(id.clone()));
            self.list.insert(id.clone(), next);
        }
    }

    /// Consuming form of [`DocState::apply_op`], for folds.
    pub fn apply(mut self, id: &OpId, op: &Operation) -> Self {
        self.apply_op(id, op);
        self
    }

    /// Elements of `list` that hold at least one value, in chain order.
    pub fn visible_list_elements(&self, list: &OpId) -> Result<Vec<OpId>, ListError> {
        Ok(self
            .list
            .chain(list)?
            .into_iter()
            .filter(|e| self.elements.has_value(list, &Key::Elem(e.clone())))
            .collect())
    }

    /// The ID of the visible element at `index`, skipping tombstones.
    pub fn idx_key(&self, list: &OpId, index: usize) -> Result<OpId, ListError> {
        let visible = self.visible_list_elements(list)?;
        let len = visible.len();
        visible
            .into_iter()
            .nth(index)
            .ok_or(ListError::IndexOutOfRange { index, len })
    }
}

/// Interprets an OpSet with the standard Assign semantics.
pub fn interpret(ops: &OpSet, mode: RegisterMode) -> DocState {
    ops.interpret(DocState::new(mode), DocState::apply)
}

/// A user-facing rendering of one object and everything reachable from it.
#[derive(Clone, Debug, PartialEq)]
pub enum MaterializedValue {
    Primitive(PrimitiveValue),
    /// Each key maps to its register slot, newest assignment first.
    Map(BTreeMap<MapKey, Vec<MaterializedValue>>),
    /// One slot per visible element.
    List(Vec<Vec<MaterializedValue>>),
    /// An object already being rendered higher up the current path.
    CycleRef(OpId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaterializeError {
    #[error("object {0:?} does not exist")]
    UnknownObject(OpId),
    #[error("{0:?} is not a MakeMap, MakeList or MakeVal operation")]
    NotAnObject(OpId),
    #[error(transparent)]
    List(#[from] ListError),
}

pub fn materialize(
    state: &DocState,
    root: &OpId,
    ops: &OpSet,
) -> Result<MaterializedValue, MaterializeError> {
    let mut path = Vec::new();
    render(state, root, ops, &mut path)
}

fn render(
    state: &DocState,
    obj: &OpId,
    ops: &OpSet,
    path: &mut Vec<OpId>,
) -> Result<MaterializedValue, MaterializeError> {
    if path.contains(obj) {
        return Ok(MaterializedValue::CycleRef(obj.clone()));
    }
    let op = ops
        .get(obj)
        .ok_or_else(|| MaterializeError::UnknownObject(obj.clone()))?;
    path.push(obj.clone());
    let out = match op {
        Operation::MakeVal(v) => MaterializedValue::Primitive(v.clone()),
        Operation::MakeMap => {
            let mut keys: BTreeSet<&MapKey> = BTreeSet::new();
            for (_, e) in state.elements.iter() {
                if &e.obj == obj {
                    if let Key::Map(k) = &e.key {
                        keys.insert(k);
                    }
                }
            }
            let mut map = BTreeMap::new();
            for k in keys {
                let key = Key::Map(k.clone());
                let slot = render_slot(state, obj, &key, ops, path)?;
                map.insert(k.clone(), slot);
            }
            MaterializedValue::Map(map)
        }
        Operation::MakeList => {
            let mut items = Vec::new();
            for elem in state.visible_list_elements(obj)? {
                items.push(render_slot(state, obj, &Key::Elem(elem), ops, path)?);
            }
            MaterializedValue::List(items)
        }
        _ => {
            path.pop();
            return Err(MaterializeError::NotAnObject(obj.clone()));
        }
    };
    path.pop();
    Ok(out)
}

// Values that do not name an object are stored in E but not rendered.
fn render_slot(
    state: &DocState,
    obj: &OpId,
    key: &Key,
    ops: &OpSet,
    path: &mut Vec<OpId>,
) -> Result<Vec<MaterializedValue>, MaterializeError> {
    let mut slot = Vec::new();
    for (_, val) in state.elements.slot(obj, key) {
        if ops.get(val).is_some_and(Operation::is_make) {
            slot.push(render(state, val, ops, path)?);
        }
    }
    Ok(slot)
}
