//! Replicated Growable Array: the insertion-only list CRDT, applied in causal
//! (not ID) order, and an equivalence check against the sequential list
//! interpretation.
//!
//! Concurrent insertions after the same reference end up in descending ID
//! order, which is exactly what the sequential interpretation produces when
//! it applies them in ascending ID order.

use std::collections::BTreeSet;
use std::fmt::Debug;

use serde::Serialize;

use crate::listspec::{interp_ins, InsOp, PreconditionError};

/// Places `e` before the first element smaller than it, or at the end.
pub fn insert_body<I: Ord + Clone>(xs: &[I], e: &I) -> Vec<I> {
    let at = xs.iter().position(|x| x < e).unwrap_or(xs.len());
    let mut out = Vec::with_capacity(xs.len() + 1);
    out.extend_from_slice(&xs[..at]);
    out.push(e.clone());
    out.extend_from_slice(&xs[at..]);
    out
}

pub fn insert_rga<I: Ord + Clone>(xs: &[I], op: &InsOp<I>) -> Vec<I> {
    match &op.reference {
        None => insert_body(xs, &op.id),
        Some(r) => match xs.iter().position(|x| x == r) {
            Some(pos) => {
                let mut out = xs[..=pos].to_vec();
                out.extend(insert_body(&xs[pos + 1..], &op.id));
                out
            }
            None => xs.to_vec(),
        },
    }
}

pub fn interp_rga<I: Ord + Clone>(log: &[InsOp<I>]) -> Vec<I> {
    log.iter().fold(Vec::new(), |xs, op| insert_rga(&xs, op))
}

/// Distinct IDs, and every reference names an earlier operation with a
/// smaller ID.
pub fn check_crdt_ops<I: Ord>(ops: &[InsOp<I>]) -> bool {
    let mut seen = BTreeSet::new();
    for op in ops {
        if let Some(r) = &op.reference {
            if !seen.contains(r) || r >= &op.id {
                return false;
            }
        }
        if !seen.insert(&op.id) {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RgaVerdict<I> {
    Equal,
    Mismatch { rga: Vec<I>, spec: Vec<I> },
}

/// Runs RGA on the log as delivered and the sequential interpretation on the
/// log sorted by ID, and compares the results.
pub fn check_rga_equivalence<I: Ord + Clone + Debug>(
    log: &[InsOp<I>],
) -> Result<RgaVerdict<I>, PreconditionError> {
    if !check_crdt_ops(log) {
        return Err(PreconditionError::NotCrdtOps);
    }
    let mut sorted = log.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let spec = interp_ins(&sorted);
    let rga = interp_rga(log);
    Ok(if spec == rga {
        RgaVerdict::Equal
    } else {
        RgaVerdict::Mismatch { rga, spec }
    })
}
