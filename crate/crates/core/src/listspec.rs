//! Executable list specification.
//!
//! Two equivalent interpretations of insertion-only logs (a sequence-based
//! one and a successor-relation one), the no-interleaving checker for
//! concurrent runs of typing, and checkers for the four conditions of the
//! strong list specification over an Insert/Delete operation language.
//!
//! Everything here is generic over the identifier type so tests can use small
//! integers; the rest of the crate instantiates it with [`crate::OpId`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// An insertion: `id` goes immediately after `reference`, or at the head of
/// the list when `reference` is `None`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InsOp<I> {
    pub id: I,
    pub reference: Option<I>,
}

impl<I> InsOp<I> {
    pub fn head(id: I) -> Self {
        InsOp {
            id,
            reference: None,
        }
    }

    pub fn after(id: I, reference: I) -> Self {
        InsOp {
            id,
            reference: Some(reference),
        }
    }
}

pub fn insert_spec<I: Ord + Clone>(xs: &[I], op: &InsOp<I>) -> Vec<I> {
    let mut out = xs.to_vec();
    match &op.reference {
        None => out.insert(0, op.id.clone()),
        Some(r) => {
            if let Some(pos) = xs.iter().position(|x| x == r) {
                out.insert(pos + 1, op.id.clone());
            }
        }
    }
    out
}

pub fn interp_ins<I: Ord + Clone>(ops: &[InsOp<I>]) -> Vec<I> {
    ops.iter().fold(Vec::new(), |xs, op| insert_spec(&xs, op))
}

/// Sorted strictly by ID, and every reference below its operation.
pub fn is_insert_ops<I: Ord>(ops: &[InsOp<I>]) -> bool {
    ops.windows(2).all(|w| w[0].id < w[1].id)
        && ops
            .iter()
            .all(|op| op.reference.as_ref().is_none_or(|r| r < &op.id))
}

pub type SuccRel<I> = BTreeSet<(I, Option<I>)>;

pub fn succ_rel<I: Ord + Clone>(xs: &[I]) -> SuccRel<I> {
    let mut rel: SuccRel<I> = xs
        .windows(2)
        .map(|w| (w[0].clone(), Some(w[1].clone())))
        .collect();
    if let Some(last) = xs.last() {
        rel.insert((last.clone(), None));
    }
    rel
}

pub fn insert_alt<I: Ord + Clone>(rel: &SuccRel<I>, id: &I, reference: &I) -> SuccRel<I> {
    let Some(next) = rel
        .iter()
        .find(|(p, _)| p == reference)
        .map(|(_, n)| n.clone())
    else {
        return rel.clone();
    };
    let mut out: SuccRel<I> = rel.iter().filter(|(p, _)| p != reference).cloned().collect();
    out.insert((reference.clone(), Some(id.clone())));
    out.insert((id.clone(), next));
    out
}

/// Folds [`insert_alt`] from `{(head, None)}`, with head insertions rewritten
/// to reference `head`.
pub fn interp_alt<I: Ord + Clone>(head: &I, ops: &[InsOp<I>]) -> SuccRel<I> {
    ops.iter().fold(BTreeSet::from([(head.clone(), None)]), |rel, op| {
        insert_alt(&rel, &op.id, op.reference.as_ref().unwrap_or(head))
    })
}

/// Non-empty, the first op references `start`, and each later op references
/// its predecessor.
pub fn is_insert_seq<I: Eq>(start: Option<&I>, ops: &[InsOp<I>]) -> bool {
    let Some(first) = ops.first() else {
        return false;
    };
    first.reference.as_ref() == start
        && ops
            .windows(2)
            .all(|w| w[1].reference.as_ref() == Some(&w[0].id))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Interleaving {
    /// Every element of `xs` precedes every element of `ys`.
    #[serde(rename = "block_xy")]
    BlockXY,
    #[serde(rename = "block_yx")]
    BlockYX,
    /// The shared start element is absent and neither run took effect.
    StartMissing,
    Violation { reason: String },
}

impl Interleaving {
    pub fn is_violation(&self) -> bool {
        matches!(self, Interleaving::Violation { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreconditionError {
    #[error("operations are not sorted by ID with references below IDs")]
    NotInsertOps,
    #[error("{0} is not an insertion sequence from the given start")]
    NotInsertSeq(&'static str),
    #[error("{0} contains operations missing from the log")]
    NotSubset(&'static str),
    #[error("IDs across xs and ys are not distinct")]
    NotDistinct,
    #[error("log does not satisfy the causal delivery discipline")]
    NotCrdtOps,
}

/// Classifies a claimed list order with respect to two runs that share a
/// start element.
pub fn classify_interleaving<I: Ord + Debug>(
    order: &[I],
    xs: &[I],
    ys: &[I],
    start: Option<&I>,
) -> Interleaving {
    let pos: BTreeMap<&I, usize> = order.iter().enumerate().map(|(i, x)| (x, i)).collect();
    if let Some(s) = start {
        if !pos.contains_key(s) {
            return match xs.iter().chain(ys).find(|x| pos.contains_key(x)) {
                None => Interleaving::StartMissing,
                Some(x) => Interleaving::Violation {
                    reason: format!("start {s:?} is absent but {x:?} was inserted"),
                },
            };
        }
    }
    let locate = |run: &[I]| -> Result<Vec<usize>, Interleaving> {
        run.iter()
            .map(|x| {
                pos.get(x).copied().ok_or_else(|| Interleaving::Violation {
                    reason: format!("{x:?} is missing from the list"),
                })
            })
            .collect()
    };
    let (px, py) = match (locate(xs), locate(ys)) {
        (Ok(px), Ok(py)) => (px, py),
        (Err(v), _) | (_, Err(v)) => return v,
    };
    let (Some(&xmin), Some(&xmax)) = (px.iter().min(), px.iter().max()) else {
        return Interleaving::BlockYX;
    };
    let (Some(&ymin), Some(&ymax)) = (py.iter().min(), py.iter().max()) else {
        return Interleaving::BlockXY;
    };
    if xmax < ymin {
        Interleaving::BlockXY
    } else if ymax < xmin {
        Interleaving::BlockYX
    } else {
        Interleaving::Violation {
            reason: format!(
                "runs overlap: xs spans {xmin}..={xmax}, ys spans {ymin}..={ymax}"
            ),
        }
    }
}

pub fn check_no_interleaving<I: Ord + Clone + Debug>(
    ops: &[InsOp<I>],
    xs: &[InsOp<I>],
    ys: &[InsOp<I>],
    start: Option<&I>,
) -> Result<Interleaving, PreconditionError> {
    if !is_insert_ops(ops) {
        return Err(PreconditionError::NotInsertOps);
    }
    for (name, run) in [("xs", xs), ("ys", ys)] {
        if !is_insert_seq(start, run) || !is_insert_ops(run) {
            return Err(PreconditionError::NotInsertSeq(name));
        }
        let all: BTreeSet<&InsOp<I>> = ops.iter().collect();
        if !run.iter().all(|op| all.contains(op)) {
            return Err(PreconditionError::NotSubset(name));
        }
    }
    let xs_ids: Vec<I> = xs.iter().map(|o| o.id.clone()).collect();
    let ys_ids: Vec<I> = ys.iter().map(|o| o.id.clone()).collect();
    let distinct: BTreeSet<&I> = xs_ids.iter().chain(&ys_ids).collect();
    if distinct.len() != xs_ids.len() + ys_ids.len() {
        return Err(PreconditionError::NotDistinct);
    }
    Ok(classify_interleaving(
        &interp_ins(ops),
        &xs_ids,
        &ys_ids,
        start,
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ListOp<I, V> {
    Insert { reference: Option<I>, val: V },
    Delete { reference: I },
}

impl<I, V> ListOp<I, V> {
    pub fn reference(&self) -> Option<&I> {
        match self {
            ListOp::Insert { reference, .. } => reference.as_ref(),
            ListOp::Delete { reference } => Some(reference),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ListState<I, V> {
    /// Element IDs in list order, including deleted ones.
    pub order: Vec<I>,
    pub vals: BTreeMap<I, V>,
}

impl<I, V> Default for ListState<I, V> {
    fn default() -> Self {
        ListState {
            order: Vec::new(),
            vals: BTreeMap::new(),
        }
    }
}

pub fn interp_op<I: Ord + Clone, V: Clone>(
    mut state: ListState<I, V>,
    id: &I,
    op: &ListOp<I, V>,
) -> ListState<I, V> {
    match op {
        ListOp::Insert { reference, val } => {
            state.order = insert_spec(
                &state.order,
                &InsOp {
                    id: id.clone(),
                    reference: reference.clone(),
                },
            );
            state.vals.insert(id.clone(), val.clone());
        }
        ListOp::Delete { reference } => {
            state.vals.remove(reference);
        }
    }
    state
}

pub fn interp_ops<I: Ord + Clone, V: Clone>(ops: &[(I, ListOp<I, V>)]) -> ListState<I, V> {
    ops.iter()
        .fold(ListState::default(), |s, (id, op)| interp_op(s, id, op))
}

/// Sorted strictly by ID, and every reference below its operation.
pub fn is_list_ops<I: Ord, V>(ops: &[(I, ListOp<I, V>)]) -> bool {
    ops.windows(2).all(|w| w[0].0 < w[1].0)
        && ops
            .iter()
            .all(|(id, op)| op.reference().is_none_or(|r| r < id))
}

/// Whether `order` splits as `xs ++ [x] ++ ys ++ [y] ++ zs`.
fn precedes<I: Eq>(order: &[I], x: &I, y: &I) -> bool {
    match order.iter().position(|e| e == x) {
        Some(i) => order[i + 1..].iter().any(|e| e == y),
        None => false,
    }
}

pub fn list_order<I: Ord + Clone, V: Clone>(ops: &[(I, ListOp<I, V>)], x: &I, y: &I) -> bool {
    precedes(&interp_ops(ops).order, x, y)
}

/// The operation inserting `val` at index `k` of `order`, clamping `k` to the
/// end of the list.
pub fn make_insert<I: Clone, V>(order: &[I], val: V, k: usize) -> ListOp<I, V> {
    if k == 0 || order.is_empty() {
        return ListOp::Insert {
            reference: None,
            val,
        };
    }
    ListOp::Insert {
        reference: Some(order[(k - 1).min(order.len() - 1)].clone()),
        val,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AStrongConfig {
    /// Logs with at most this many operations get every subset checked for
    /// list-order consistency.
    pub exhaustive_up_to: usize,
    /// Random subsets to sample for longer logs.
    pub samples: usize,
    pub seed: u64,
}

impl Default for AStrongConfig {
    fn default() -> Self {
        AStrongConfig {
            exhaustive_up_to: 10,
            samples: 200,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConditionResult {
    pub passed: bool,
    pub checked: usize,
    pub witness: Option<String>,
}

impl ConditionResult {
    fn new() -> Self {
        ConditionResult {
            passed: true,
            checked: 0,
            witness: None,
        }
    }

    fn fail(&mut self, witness: String) {
        if self.passed {
            self.passed = false;
            self.witness = Some(witness);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AStrongReport {
    /// 1a: visible elements are exactly those inserted and not deleted.
    pub inserted_but_not_deleted: ConditionResult,
    /// 1b: the order seen by any sub-log agrees with the full log's order.
    pub list_order_consistent: ConditionResult,
    /// 1c: each insertion lands at its requested index.
    pub correct_position: ConditionResult,
    /// 2: the list order is transitive, irreflexive and total.
    pub strict_total_order: ConditionResult,
}

impl AStrongReport {
    pub fn all_passed(&self) -> bool {
        self.inserted_but_not_deleted.passed
            && self.list_order_consistent.passed
            && self.correct_position.passed
            && self.strict_total_order.passed
    }
}

pub fn check_astrong<I, V>(
    ops: &[(I, ListOp<I, V>)],
    cfg: &AStrongConfig,
) -> Result<AStrongReport, PreconditionError>
where
    I: Ord + Clone + Debug,
    V: Clone + PartialEq + Debug,
{
    if !is_list_ops(ops) {
        return Err(PreconditionError::NotInsertOps);
    }
    let full = interp_ops(ops);
    Ok(AStrongReport {
        inserted_but_not_deleted: check_inserted_but_not_deleted(ops, &full),
        list_order_consistent: check_list_order_consistent(ops, &full, cfg),
        correct_position: check_correct_position(ops),
        strict_total_order: check_strict_total_order(&full.order),
    })
}

fn check_inserted_but_not_deleted<I, V>(
    ops: &[(I, ListOp<I, V>)],
    full: &ListState<I, V>,
) -> ConditionResult
where
    I: Ord + Clone + Debug,
{
    let mut res = ConditionResult::new();
    let mut candidates: BTreeSet<&I> = full.vals.keys().collect();
    candidates.extend(ops.iter().map(|(id, _)| id));
    for a in candidates {
        res.checked += 1;
        let inserted = ops
            .iter()
            .any(|(id, op)| id == a && matches!(op, ListOp::Insert { .. }));
        let deleted = ops
            .iter()
            .any(|(_, op)| matches!(op, ListOp::Delete { reference } if reference == a));
        if full.vals.contains_key(a) != (inserted && !deleted) {
            res.fail(format!(
                "{a:?}: in vals = {}, inserted = {inserted}, deleted = {deleted}",
                full.vals.contains_key(a)
            ));
        }
    }
    res
}

fn check_list_order_consistent<I, V>(
    ops: &[(I, ListOp<I, V>)],
    full: &ListState<I, V>,
    cfg: &AStrongConfig,
) -> ConditionResult
where
    I: Ord + Clone + Debug,
    V: Clone,
{
    let mut res = ConditionResult::new();
    let n = ops.len();
    let mut check = |mask: &dyn Fn(usize) -> bool| {
        let subset: Vec<(I, ListOp<I, V>)> = ops
            .iter()
            .enumerate()
            .filter(|(i, _)| mask(*i))
            .map(|(_, o)| o.clone())
            .collect();
        let sub = interp_ops(&subset).order;
        res.checked += 1;
        for (i, x) in sub.iter().enumerate() {
            for y in &sub[i + 1..] {
                if !precedes(&full.order, x, y) {
                    res.fail(format!(
                        "{x:?} precedes {y:?} in sub-log {:?} but not in the full log",
                        subset.iter().map(|(id, _)| id).collect::<Vec<_>>()
                    ));
                    return;
                }
            }
        }
    };
    if n <= cfg.exhaustive_up_to {
        for bits in 0u64..(1u64 << n) {
            check(&|i| bits >> i & 1 == 1);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.samples {
            let keep: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            check(&|i| keep[i]);
        }
    }
    res
}

/// For every insertion whose reference is present (or absent, for head
/// insertions), recovers the index `k` that [`make_insert`] would have been
/// called with and checks where the new element lands.
fn check_correct_position<I, V>(ops: &[(I, ListOp<I, V>)]) -> ConditionResult
where
    I: Ord + Clone + Debug,
    V: Clone + PartialEq,
{
    let mut res = ConditionResult::new();
    let mut state = ListState::default();
    for (id, op) in ops {
        if let ListOp::Insert { reference, val } = op {
            let k = match reference {
                None => Some(0),
                Some(r) => state.order.iter().position(|e| e == r).map(|p| p + 1),
            };
            if let Some(k) = k {
                res.checked += 1;
                if &make_insert(&state.order, val.clone(), k) != op {
                    res.fail(format!("{id:?} is not the make_insert operation for index {k}"));
                }
                let next = interp_op(state.clone(), id, op);
                let at = k.min(next.order.len() - 1);
                if next.order[at] != *id {
                    res.fail(format!(
                        "{id:?} inserted at index {k} but index {at} holds {:?}",
                        next.order[at]
                    ));
                }
            }
        }
        state = interp_op(state, id, op);
    }
    res
}

fn check_strict_total_order<I: Ord + Debug>(order: &[I]) -> ConditionResult {
    let mut res = ConditionResult::new();
    let elems: BTreeSet<&I> = order.iter().collect();
    let lo = |x: &I, y: &I| precedes(order, x, y);
    for &x in &elems {
        res.checked += 1;
        if lo(x, x) {
            res.fail(format!("{x:?} precedes itself"));
        }
        for &y in &elems {
            if x != y && !lo(x, y) && !lo(y, x) {
                res.fail(format!("{x:?} and {y:?} are unordered"));
            }
            if lo(x, y) {
                for &z in &elems {
                    if lo(y, z) && !lo(x, z) {
                        res.fail(format!("{x:?} < {y:?} < {z:?} but not {x:?} < {z:?}"));
                    }
                }
            }
        }
    }
    res
}
