//! The operation set: a grow-only, uniquely keyed set of `(OpId, Operation)`
//! pairs, merged by set union and interpreted by folding a step function over
//! the operations in ascending ID order.

use std::collections::btree_map::{self, BTreeMap, Entry};

use thiserror::Error;

use crate::id::OpId;
use crate::op::Operation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpSetError {
    #[error("operation {id:?} already present with a different action")]
    Uniqueness { id: OpId },
    #[error("operation {id:?} depends on {dep:?}, which is not smaller")]
    Causality { id: OpId, dep: OpId },
    #[error("counter overflow: no identifier greater than {max}")]
    CounterOverflow { max: u64 },
    #[error("node identifier must be non-empty")]
    EmptyNode,
}

/// A finite set of operations keyed by their unique ID.
///
/// Backed by a `BTreeMap`, so iteration order is the linearisation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpSet {
    entries: BTreeMap<OpId, Operation>,
}

impl OpSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an OpSet from pairs, validating each one.
    pub fn from_ops<I>(ops: I) -> Result<Self, OpSetError>
    where
        I: IntoIterator<Item = (OpId, Operation)>,
    {
        let mut set = OpSet::new();
        for (id, op) in ops {
            set.insert(id, op)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &OpId) -> Option<&Operation> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &OpId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn max_id(&self) -> Option<&OpId> {
        self.entries.keys().next_back()
    }

    /// Largest counter over every entry regardless of node; 0 when empty.
    pub fn max_counter(&self) -> u64 {
        self.entries.keys().map(|id| id.counter).max().unwrap_or(0)
    }

    /// A fresh identifier `(max_counter + 1, node)`.
    pub fn new_id(&self, node: &str) -> Result<OpId, OpSetError> {
        if node.is_empty() {
            return Err(OpSetError::EmptyNode);
        }
        let max = self.max_counter();
        let counter = max
            .checked_add(1)
            .ok_or(OpSetError::CounterOverflow { max })?;
        Ok(OpId::new(counter, node))
    }

    /// Checks that `(id, op)` could join this set. Returns `Ok(true)` if the
    /// pair is new and `Ok(false)` if the identical pair is already present.
    fn admit(&self, id: &OpId, op: &Operation) -> Result<bool, OpSetError> {
        if let Some(dep) = op.deps().into_iter().find(|d| *d >= id) {
            return Err(OpSetError::Causality {
                id: id.clone(),
                dep: dep.clone(),
            });
        }
        match self.entries.get(id) {
            Some(existing) if existing == op => Ok(false),
            Some(_) => Err(OpSetError::Uniqueness { id: id.clone() }),
            None => Ok(true),
        }
    }

    /// Adds one operation in place. Re-adding an identical pair is a no-op.
    pub fn insert(&mut self, id: OpId, op: Operation) -> Result<bool, OpSetError> {
        if !self.admit(&id, &op)? {
            return Ok(false);
        }
        self.entries.insert(id, op);
        Ok(true)
    }

    /// Persistent variant of [`OpSet::insert`].
    pub fn add_op(&self, id: OpId, op: Operation) -> Result<OpSet, OpSetError> {
        let mut out = self.clone();
        out.insert(id, op)?;
        Ok(out)
    }

    /// Set union. Fails without modifying `self` if any shared ID maps to
    /// different operations.
    pub fn merge_from(&mut self, other: &OpSet) -> Result<usize, OpSetError> {
        for (id, op) in &other.entries {
            if let Some(existing) = self.entries.get(id) {
                if existing != op {
                    return Err(OpSetError::Uniqueness { id: id.clone() });
                }
            }
        }
        let mut added = 0;
        for (id, op) in &other.entries {
            if let Entry::Vacant(slot) = self.entries.entry(id.clone()) {
                slot.insert(op.clone());
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn merge(&self, other: &OpSet) -> Result<OpSet, OpSetError> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    /// Operations in strictly ascending ID order.
    pub fn linearize(&self) -> btree_map::Iter<'_, OpId, Operation> {
        self.entries.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &OpId> + '_ {
        self.entries.keys()
    }

    /// The sub-OpSet of the `n` smallest operations.
    pub fn prefix(&self, n: usize) -> OpSet {
        OpSet {
            entries: self
                .entries
                .iter()
                .take(n)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Left fold of `step` over the linearisation.
    pub fn interpret<S, F>(&self, initial: S, mut step: F) -> S
    where
        F: FnMut(S, &OpId, &Operation) -> S,
    {
        self.linearize()
            .fold(initial, |state, (id, op)| step(state, id, op))
    }
}

impl<'a> IntoIterator for &'a OpSet {
    type Item = (&'a OpId, &'a Operation);
    type IntoIter = btree_map::Iter<'a, OpId, Operation>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Whether `ops` is a valid linearisation: strictly ascending IDs (hence
/// distinct) and every dependency below its operation.
pub fn is_spec_ops<'a, I>(ops: I) -> bool
where
    I: IntoIterator<Item = (&'a OpId, &'a Operation)>,
{
    let mut last: Option<&OpId> = None;
    for (id, op) in ops {
        if last.is_some_and(|l| l >= id) {
            return false;
        }
        if op.deps().into_iter().any(|d| d >= id) {
            return false;
        }
        last = Some(id);
    }
    true
}

/// An OpSet paired with its current interpretation.
///
/// Operations whose ID exceeds every existing ID are applied directly to the
/// cached state; anything else triggers a full recomputation.
pub struct Interpreted<S, F> {
    ops: OpSet,
    initial: S,
    state: S,
    step: F,
    recomputations: usize,
}

impl<S, F> Interpreted<S, F>
where
    S: Clone,
    F: FnMut(S, &OpId, &Operation) -> S,
{
    pub fn new(initial: S, step: F) -> Self {
        Interpreted {
            ops: OpSet::new(),
            state: initial.clone(),
            initial,
            step,
            recomputations: 0,
        }
    }

    pub fn ops(&self) -> &OpSet {
        &self.ops
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn recomputations(&self) -> usize {
        self.recomputations
    }

    pub fn insert(&mut self, id: OpId, op: Operation) -> Result<(), OpSetError> {
        let fast = self.ops.max_id().is_none_or(|max| &id > max);
        if !self.ops.insert(id.clone(), op.clone())? {
            return Ok(());
        }
        if fast {
            let state = std::mem::replace(&mut self.state, self.initial.clone());
            self.state = (self.step)(state, &id, &op);
        } else {
            self.recompute();
        }
        Ok(())
    }

    fn recompute(&mut self) {
        self.recomputations += 1;
        let step = &mut self.step;
        self.state = self.ops.interpret(self.initial.clone(), |s, id, op| step(s, id, op));
    }
}
