//! Seeded generators for random logs, shared by the property tests, the
//! acceptance suite, the command-line checkers and the benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::document::Semantics;
use crate::id::OpId;
use crate::listspec::{interp_ops, make_insert, InsOp, ListOp};
use crate::op::{Key, Operation};
use crate::opgen::{Editor, ValueSpec};
use crate::opset::OpSet;
use crate::tree::{RootKind, TreeConfig};

const NODES: [&str; 3] = ["a", "b", "c"];

/// Strictly increasing Lamport identifiers, sometimes reusing a counter with a
/// larger node name so that node tie-breaks get exercised.
#[derive(Clone, Debug, Default)]
pub struct IdSource {
    last: Option<OpId>,
}

impl IdSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> OpId {
        let id = match &self.last {
            None => OpId::new(1, *NODES.choose(rng).unwrap()),
            Some(last) => {
                let bigger: Vec<&str> = NODES
                    .iter()
                    .copied()
                    .filter(|n| *n > last.node.as_str())
                    .collect();
                if !bigger.is_empty() && rng.gen_bool(0.3) {
                    OpId::new(last.counter, *bigger.choose(rng).unwrap())
                } else {
                    OpId::new(last.counter + rng.gen_range(1..=2), *NODES.choose(rng).unwrap())
                }
            }
        };
        self.last = Some(id.clone());
        id
    }
}

/// A random insertion log in ID order. References name earlier operations,
/// and occasionally an ID that was skipped and never inserted.
pub fn insert_ops<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> Vec<InsOp<OpId>> {
    let len = rng.gen_range(0..=max_len);
    let mut ids = IdSource::new();
    let mut ops: Vec<InsOp<OpId>> = Vec::with_capacity(len);
    let mut phantoms = Vec::new();
    for _ in 0..len {
        if rng.gen_bool(0.05) {
            phantoms.push(ids.next(rng));
        }
        let id = ids.next(rng);
        let reference = match rng.gen_range(0..10) {
            0..=1 => None,
            2 if !phantoms.is_empty() => Some(phantoms.choose(rng).unwrap().clone()),
            _ => ops.choose(rng).map(|o| o.id.clone()),
        };
        ops.push(InsOp { id, reference });
    }
    ops
}

/// A random insertion log in a causal delivery order: every reference names
/// an operation that appears earlier, but concurrent operations are shuffled.
pub fn crdt_log<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> Vec<InsOp<OpId>> {
    let len = rng.gen_range(0..=max_len);
    let mut ids = IdSource::new();
    let mut sorted: Vec<InsOp<OpId>> = Vec::with_capacity(len);
    for _ in 0..len {
        let id = ids.next(rng);
        let reference = if sorted.is_empty() || rng.gen_bool(0.25) {
            None
        } else {
            Some(sorted.choose(rng).unwrap().id.clone())
        };
        sorted.push(InsOp { id, reference });
    }
    // random linear extension of the reference order
    let mut placed = std::collections::BTreeSet::new();
    let mut pending = sorted;
    let mut out = Vec::with_capacity(len);
    while !pending.is_empty() {
        let ready: Vec<usize> = pending
            .iter()
            .enumerate()
            .filter(|(_, op)| op.reference.as_ref().is_none_or(|r| placed.contains(r)))
            .map(|(i, _)| i)
            .collect();
        let pick = *ready.choose(rng).expect("references always point backwards");
        let op = pending.remove(pick);
        placed.insert(op.id.clone());
        out.push(op);
    }
    out
}

/// A log embedding two insertion runs that start at the same position.
#[derive(Clone, Debug)]
pub struct InterleavingTrial {
    pub ops: Vec<InsOp<OpId>>,
    pub xs: Vec<InsOp<OpId>>,
    pub ys: Vec<InsOp<OpId>>,
    pub start: Option<OpId>,
}

/// Builds a trial. With `start_exists`, the runs begin after an element that
/// is in the log (or at the head); otherwise after an ID that never appears.
pub fn interleaving_trial<R: Rng + ?Sized>(
    rng: &mut R,
    max_background: usize,
    max_run: usize,
    start_exists: bool,
) -> InterleavingTrial {
    let mut ids = IdSource::new();
    let mut ops: Vec<InsOp<OpId>> = Vec::new();

    let prefix = rng.gen_range(0..=max_background / 2);
    for _ in 0..prefix {
        let id = ids.next(rng);
        let reference = background_ref(rng, &ops);
        ops.push(InsOp { id, reference });
    }
    let start = if start_exists {
        if ops.is_empty() || rng.gen_bool(0.2) {
            None
        } else {
            Some(ops.choose(rng).unwrap().id.clone())
        }
    } else {
        Some(ids.next(rng))
    };

    let nx = rng.gen_range(1..=max_run);
    let ny = rng.gen_range(1..=max_run);
    let rest = rng.gen_range(0..=max_background - prefix.min(max_background));
    let mut plan: Vec<u8> = std::iter::repeat_n(0, nx)
        .chain(std::iter::repeat_n(1, ny))
        .chain(std::iter::repeat_n(2, rest))
        .collect();
    plan.shuffle(rng);

    let (mut xs, mut ys): (Vec<InsOp<OpId>>, Vec<InsOp<OpId>>) = (Vec::new(), Vec::new());
    for step in plan {
        let id = ids.next(rng);
        let op = match step {
            0 | 1 => {
                let run = if step == 0 { &xs } else { &ys };
                let reference = match run.last() {
                    Some(prev) => Some(prev.id.clone()),
                    None => start.clone(),
                };
                InsOp { id, reference }
            }
            _ => InsOp {
                reference: background_ref(rng, &ops),
                id,
            },
        };
        match step {
            0 => xs.push(op.clone()),
            1 => ys.push(op.clone()),
            _ => {}
        }
        ops.push(op);
    }
    InterleavingTrial { ops, xs, ys, start }
}

fn background_ref<R: Rng + ?Sized>(rng: &mut R, ops: &[InsOp<OpId>]) -> Option<OpId> {
    if ops.is_empty() || rng.gen_bool(0.2) {
        None
    } else {
        Some(ops.choose(rng).unwrap().id.clone())
    }
}

/// A random Insert/Delete log where every insertion comes from
/// [`make_insert`] at a random (possibly out-of-range) index.
pub fn astrong_log<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> Vec<(OpId, ListOp<OpId, i64>)> {
    let len = rng.gen_range(1..=max_len.max(1));
    let mut ids = IdSource::new();
    let mut ops: Vec<(OpId, ListOp<OpId, i64>)> = Vec::with_capacity(len);
    for step in 0..len {
        let order = interp_ops(&ops).order;
        let id = ids.next(rng);
        let op = if order.is_empty() || rng.gen_bool(0.7) {
            let k = rng.gen_range(0..=order.len() + 2);
            make_insert(&order, step as i64, k)
        } else {
            ListOp::Delete {
                reference: order.choose(rng).unwrap().clone(),
            }
        };
        ops.push((id, op));
    }
    ops
}

/// A tree-mode OpSet built by several replicas that create and move map
/// objects concurrently and merge at random points.
pub fn tree_log<R: Rng + ?Sized>(rng: &mut R, rounds: usize) -> OpSet {
    let cfg = TreeConfig::new(RootKind::Map);
    let nodes = rng.gen_range(2..=3);
    let mut replicas: Vec<OpSet> = vec![cfg.seed(); nodes];
    let editors: Vec<Editor> = (0..nodes)
        .map(|i| Editor::new(NODES[i]).with_semantics(Semantics::Tree))
        .collect();
    for _ in 0..rounds {
        let i = rng.gen_range(0..nodes);
        let ops = &replicas[i];
        let maps: Vec<OpId> = ops
            .linearize()
            .filter(|(_, op)| matches!(op, Operation::MakeMap))
            .map(|(id, _)| id.clone())
            .collect();
        let parent = maps.choose(rng).unwrap().clone();
        let key = *["x", "y", "z"].choose(rng).unwrap();
        let movable: Vec<&OpId> = maps.iter().filter(|m| !m.is_root()).collect();
        let value = if movable.is_empty() || rng.gen_bool(0.4) {
            ValueSpec::EmptyMap
        } else {
            ValueSpec::Existing((*movable.choose(rng).unwrap()).clone())
        };
        let next = editors[i]
            .set_map_key(ops, &parent, key.into(), &value)
            .expect("tree edits on known maps succeed");
        replicas[i] = next;
        if rng.gen_bool(0.3) {
            let j = rng.gen_range(0..nodes);
            let src = replicas[j].clone();
            replicas[i].merge_from(&src).expect("replicas never conflict");
        }
    }
    let mut all = OpSet::new();
    for r in &replicas {
        all.merge_from(r).expect("replicas never conflict");
    }
    all
}

/// Keys that assign an existing object somewhere it already was are still
/// moves; this counts how many `Assign`s in `ops` reuse an earlier object.
pub fn count_moves(ops: &OpSet) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    let mut moves = 0;
    for (_, op) in ops.linearize() {
        if let Operation::Assign {
            val,
            key: Key::Map(_),
            ..
        } = op
        {
            if !seen.insert(val.clone()) {
                moves += 1;
            }
        }
    }
    moves
}
