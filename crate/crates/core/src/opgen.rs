//! Generating operations for map and list edits.
//!
//! Each call reads the current interpretation of the OpSet, derives the
//! operations that express the edit, and returns the grown OpSet. New IDs are
//! always `max_counter + 1`, so generated operations are causally valid.

use thiserror::Error;

use crate::datatypes::{DocState, ListError};
use crate::document::Semantics;
use crate::id::OpId;
use crate::op::{Key, MapKey, Operation, PrimitiveValue};
use crate::opset::{OpSet, OpSetError};

#[derive(Clone, Debug, PartialEq)]
pub enum ValueSpec {
    Primitive(PrimitiveValue),
    EmptyMap,
    EmptyList,
    Existing(OpId),
}

impl<T: Into<PrimitiveValue>> From<T> for ValueSpec {
    fn from(v: T) -> Self {
        ValueSpec::Primitive(v.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpGenError {
    #[error("object {0:?} does not exist")]
    UnknownObject(OpId),
    #[error("{0:?} is not a map")]
    NotAMap(OpId),
    #[error("{0:?} is not a list")]
    NotAList(OpId),
    #[error("{0:?} is not a map or list object")]
    NotAnObject(OpId),
    #[error(transparent)]
    List(#[from] ListError),
    #[error(transparent)]
    OpSet(#[from] OpSetError),
}

/// Generates operations on behalf of one node.
#[derive(Clone, Debug)]
pub struct Editor {
    node: String,
    semantics: Semantics,
}

impl Editor {
    pub fn new(node: impl Into<String>) -> Self {
        Editor {
            node: node.into(),
            semantics: Semantics::MultiValue,
        }
    }

    /// Reads state through `semantics` when computing `prev` sets and list
    /// positions.
    pub fn with_semantics(mut self, semantics: Semantics) -> Self {
        self.semantics = semantics;
        self
    }

    pub fn node(&self) -> &str {
        &self.node
    }

    fn state(&self, o: &OpSet) -> DocState {
        self.semantics.interpret(o)
    }

    fn push(&self, o: &mut OpSet, op: Operation) -> Result<OpId, OpGenError> {
        let id = o.new_id(&self.node)?;
        o.insert(id.clone(), op)?;
        Ok(id)
    }

    /// Adds the operation that creates `v`, if any, and returns the value's ID.
    pub fn value_id(&self, o: &OpSet, v: &ValueSpec) -> Result<(OpSet, OpId), OpGenError> {
        let mut out = o.clone();
        let id = self.push_value(&mut out, v)?;
        Ok((out, id))
    }

    fn push_value(&self, o: &mut OpSet, v: &ValueSpec) -> Result<OpId, OpGenError> {
        match v {
            ValueSpec::Primitive(p) => self.push(o, Operation::MakeVal(p.clone())),
            ValueSpec::EmptyMap => self.push(o, Operation::MakeMap),
            ValueSpec::EmptyList => self.push(o, Operation::MakeList),
            ValueSpec::Existing(id) => match o.get(id) {
                Some(Operation::MakeMap | Operation::MakeList) => Ok(id.clone()),
                Some(_) => Err(OpGenError::NotAnObject(id.clone())),
                None => Err(OpGenError::UnknownObject(id.clone())),
            },
        }
    }

    fn expect_map(o: &OpSet, map: &OpId) -> Result<(), OpGenError> {
        match o.get(map) {
            Some(Operation::MakeMap) => Ok(()),
            Some(_) => Err(OpGenError::NotAMap(map.clone())),
            None => Err(OpGenError::UnknownObject(map.clone())),
        }
    }

    fn expect_list(o: &OpSet, list: &OpId) -> Result<(), OpGenError> {
        match o.get(list) {
            Some(Operation::MakeList) => Ok(()),
            Some(_) => Err(OpGenError::NotAList(list.clone())),
            None => Err(OpGenError::UnknownObject(list.clone())),
        }
    }

    pub fn set_map_key(
        &self,
        o: &OpSet,
        map: &OpId,
        key: MapKey,
        v: &ValueSpec,
    ) -> Result<OpSet, OpGenError> {
        Self::expect_map(o, map)?;
        let key = Key::Map(key);
        let prev = self.state(o).elements.assignments(map, &key);
        let mut out = o.clone();
        let val = self.push_value(&mut out, v)?;
        self.push(
            &mut out,
            Operation::Assign {
                obj: map.clone(),
                key,
                val,
                prev,
            },
        )?;
        Ok(out)
    }

    pub fn remove_map_key(&self, o: &OpSet, map: &OpId, key: MapKey) -> Result<OpSet, OpGenError> {
        Self::expect_map(o, map)?;
        let key = Key::Map(key);
        let prev = self.state(o).elements.assignments(map, &key);
        let mut out = o.clone();
        self.push(
            &mut out,
            Operation::Remove {
                obj: map.clone(),
                key,
                prev,
            },
        )?;
        Ok(out)
    }

    /// Inserts `v` so that it becomes the element at visible position `index`.
    pub fn ins_list_index(
        &self,
        o: &OpSet,
        list: &OpId,
        index: usize,
        v: &ValueSpec,
    ) -> Result<OpSet, OpGenError> {
        Self::expect_list(o, list)?;
        let state = self.state(o);
        let reference = if index == 0 {
            // still validate the chain
            state.visible_list_elements(list)?;
            list.clone()
        } else {
            state.idx_key(list, index - 1).map_err(|e| match e {
                ListError::IndexOutOfRange { len, .. } => {
                    ListError::IndexOutOfRange { index, len }
                }
                other => other,
            })?
        };
        let mut out = o.clone();
        let val = self.push_value(&mut out, v)?;
        let elem = self.push(&mut out, Operation::InsertAfter(reference))?;
        self.push(
            &mut out,
            Operation::Assign {
                obj: list.clone(),
                key: Key::Elem(elem),
                val,
                prev: Default::default(),
            },
        )?;
        Ok(out)
    }

    pub fn set_list_index(
        &self,
        o: &OpSet,
        list: &OpId,
        index: usize,
        v: &ValueSpec,
    ) -> Result<OpSet, OpGenError> {
        Self::expect_list(o, list)?;
        let state = self.state(o);
        let key = Key::Elem(state.idx_key(list, index)?);
        let prev = state.elements.assignments(list, &key);
        let mut out = o.clone();
        let val = self.push_value(&mut out, v)?;
        self.push(
            &mut out,
            Operation::Assign {
                obj: list.clone(),
                key,
                val,
                prev,
            },
        )?;
        Ok(out)
    }

    pub fn remove_list_index(
        &self,
        o: &OpSet,
        list: &OpId,
        index: usize,
    ) -> Result<OpSet, OpGenError> {
        Self::expect_list(o, list)?;
        let state = self.state(o);
        let key = Key::Elem(state.idx_key(list, index)?);
        let prev = state.elements.assignments(list, &key);
        let mut out = o.clone();
        self.push(
            &mut out,
            Operation::Remove {
                obj: list.clone(),
                key,
                prev,
            },
        )?;
        Ok(out)
    }
}
