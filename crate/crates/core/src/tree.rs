//! Trees with an atomic move.
//!
//! A tree is the object graph restricted so that the root has no parent, every
//! other object has exactly one parent, and the ancestor relation is acyclic.
//! Only `Assign` is interpreted differently from [`crate::datatypes`]: it is
//! skipped when it would create a cycle, and it removes any other tuple that
//! already references the assigned value, so assigning an existing object
//! moves it.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::datatypes::{DocState, Element, ElementRelation, RegisterMode};
use crate::id::OpId;
use crate::op::Operation;
use crate::opset::OpSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RootKind {
    Map,
    List,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeConfig {
    pub root: OpId,
    pub kind: RootKind,
}

impl TreeConfig {
    pub fn new(kind: RootKind) -> Self {
        TreeConfig {
            root: OpId::root(),
            kind,
        }
    }

    pub fn root_op(&self) -> Operation {
        match self.kind {
            RootKind::Map => Operation::MakeMap,
            RootKind::List => Operation::MakeList,
        }
    }

    /// An OpSet holding just the root object.
    pub fn seed(&self) -> OpSet {
        OpSet::from_ops([(self.root.clone(), self.root_op())])
            .expect("a single make operation is always valid")
    }

    /// Whether `ops` contains the root with the configured kind and the root
    /// is smaller than every other ID.
    pub fn admits(&self, ops: &OpSet) -> bool {
        ops.get(&self.root) == Some(&self.root_op()) && ops.ids().next() == Some(&self.root)
    }
}

/// Transitive closure of the one-step parent relation `(obj, val)` in `E`.
pub fn ancestor(e: &ElementRelation) -> BTreeSet<(OpId, OpId)> {
    let children = child_map(e);
    let mut out = BTreeSet::new();
    for start in children.keys() {
        let mut stack: Vec<&OpId> = children[start].iter().copied().collect();
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                out.insert(((*start).clone(), x.clone()));
                if let Some(next) = children.get(x) {
                    stack.extend(next.iter());
                }
            }
        }
    }
    out
}

fn child_map(e: &ElementRelation) -> BTreeMap<&OpId, BTreeSet<&OpId>> {
    let mut children: BTreeMap<&OpId, BTreeSet<&OpId>> = BTreeMap::new();
    for (_, el) in e.iter() {
        children.entry(&el.obj).or_default().insert(&el.val);
    }
    children
}

/// Whether `(a, d)` is in `ancestor(e)`, without building the full closure.
pub fn is_ancestor(e: &ElementRelation, a: &OpId, d: &OpId) -> bool {
    let children = child_map(e);
    let mut stack: Vec<&OpId> = children.get(a).into_iter().flatten().copied().collect();
    let mut seen = BTreeSet::new();
    while let Some(x) = stack.pop() {
        if x == d {
            return true;
        }
        if seen.insert(x) {
            if let Some(next) = children.get(x) {
                stack.extend(next.iter());
            }
        }
    }
    false
}

pub fn apply_op_tree(state: &mut DocState, id: &OpId, op: &Operation) {
    let Operation::Assign {
        obj,
        key,
        val,
        prev,
    } = op
    else {
        state.apply_op(id, op);
        return;
    };
    // Self-assignment is rejected as well: it would be a cycle of length one.
    if val == obj || is_ancestor(&state.elements, val, obj) {
        return;
    }
    state
        .elements
        .retain(|i, e| !prev.contains(i) && &e.val != val);
    state.elements.insert(
        id.clone(),
        Element {
            obj: obj.clone(),
            key: key.clone(),
            val: val.clone(),
        },
    );
}

/// Interprets an OpSet under the tree semantics.
pub fn interpret_tree(ops: &OpSet) -> DocState {
    ops.interpret(DocState::new(RegisterMode::MultiValue), |mut s, id, op| {
        apply_op_tree(&mut s, id, op);
        s
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeViolation {
    RootHasParent { assignment: OpId },
    MultipleParents { object: OpId, assignments: Vec<OpId> },
    Cycle { object: OpId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TreeReport {
    pub violations: Vec<TreeViolation>,
}

impl TreeReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_tree_invariants(state: &DocState, cfg: &TreeConfig) -> TreeReport {
    let mut violations = Vec::new();
    let mut by_val: BTreeMap<&OpId, Vec<OpId>> = BTreeMap::new();
    for (id, e) in state.elements.iter() {
        if e.val == cfg.root {
            violations.push(TreeViolation::RootHasParent {
                assignment: id.clone(),
            });
        }
        by_val.entry(&e.val).or_default().push(id.clone());
    }
    for (val, assignments) in by_val {
        if assignments.len() > 1 {
            violations.push(TreeViolation::MultipleParents {
                object: val.clone(),
                assignments,
            });
        }
    }
    for (a, d) in ancestor(&state.elements) {
        if a == d {
            violations.push(TreeViolation::Cycle { object: a });
        }
    }
    TreeReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::op::Key;

    fn id(c: u64) -> OpId {
        OpId::new(c, "a")
    }

    fn elements(tuples: &[(u64, u64, &str, u64)]) -> ElementRelation {
        let mut e = ElementRelation::new();
        for &(i, obj, key, val) in tuples {
            e.insert(
                id(i),
                Element {
                    obj: id(obj),
                    key: Key::Map(key.into()),
                    val: id(val),
                },
            );
        }
        e
    }

    /// The closure computed literally: `parent(E, i)` for growing `i` until
    /// no new pairs appear.
    fn closure_by_composition(e: &ElementRelation) -> BTreeSet<(OpId, OpId)> {
        let one: BTreeSet<(OpId, OpId)> =
            e.iter().map(|(_, el)| (el.obj.clone(), el.val.clone())).collect();
        let mut all = one.clone();
        let mut layer = one.clone();
        loop {
            let next: BTreeSet<(OpId, OpId)> = layer
                .iter()
                .flat_map(|(x, y)| {
                    one.iter()
                        .filter(move |(y2, _)| y2 == y)
                        .map(move |(_, z)| (x.clone(), z.clone()))
                })
                .collect();
            let before = all.len();
            all.extend(next.iter().cloned());
            if all.len() == before {
                return all;
            }
            layer = next;
        }
    }

    #[test]
    fn ancestor_closes_transitively() {
        // root = 0, A = 1, B = 2
        let e = elements(&[(10, 0, "a", 1), (11, 1, "b", 2)]);
        let expected = BTreeSet::from([(id(0), id(1)), (id(1), id(2)), (id(0), id(2))]);
        assert_eq!(ancestor(&e), expected);
        assert_eq!(closure_by_composition(&e), expected);
        assert!(ancestor(&ElementRelation::new()).is_empty());
    }

    #[test]
    fn ancestor_of_self_loop() {
        let e = elements(&[(10, 5, "k", 5)]);
        assert!(ancestor(&e).contains(&(id(5), id(5))));
        assert!(is_ancestor(&e, &id(5), &id(5)));
    }

    #[test]
    fn ancestor_matches_composition_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(0..8);
            let tuples: Vec<_> = (0..n)
                .map(|i| (100 + i, rng.gen_range(0..5), "k", rng.gen_range(0..5)))
                .collect();
            let e = elements(&tuples);
            let closure = ancestor(&e);
            assert_eq!(closure, closure_by_composition(&e));
            for a in 0..5 {
                for d in 0..5 {
                    assert_eq!(
                        is_ancestor(&e, &id(a), &id(d)),
                        closure.contains(&(id(a), id(d)))
                    );
                }
            }
        }
    }

    #[test]
    fn invariant_checker_flags_constructed_counterexamples() {
        let cfg = TreeConfig {
            root: id(0),
            kind: RootKind::Map,
        };
        let cyclic = DocState {
            elements: elements(&[(10, 0, "a", 1), (11, 1, "r", 0)]),
            ..Default::default()
        };
        let report = check_tree_invariants(&cyclic, &cfg);
        assert!(report
            .violations
            .contains(&TreeViolation::RootHasParent { assignment: id(11) }));
        assert!(report
            .violations
            .contains(&TreeViolation::Cycle { object: id(0) }));

        let two_parents = DocState {
            elements: elements(&[(10, 0, "a", 1), (11, 0, "b", 2), (12, 1, "x", 2)]),
            ..Default::default()
        };
        assert_eq!(
            check_tree_invariants(&two_parents, &cfg).violations,
            vec![TreeViolation::MultipleParents {
                object: id(2),
                assignments: vec![id(11), id(12)]
            }]
        );

        let fine = DocState {
            elements: elements(&[(10, 0, "a", 1), (11, 1, "b", 2)]),
            ..Default::default()
        };
        assert!(check_tree_invariants(&fine, &cfg).is_ok());
    }

    fn assign(obj: u64, key: &str, val: u64, prev: &[u64]) -> Operation {
        Operation::Assign {
            obj: id(obj),
            key: Key::Map(key.into()),
            val: id(val),
            prev: prev.iter().map(|&p| id(p)).collect(),
        }
    }

    #[test]
    fn move_into_own_descendant_is_ignored() {
        let mut s = DocState {
            elements: elements(&[(10, 0, "a", 1), (11, 1, "b", 2)]),
            ..Default::default()
        };
        let before = s.clone();
        apply_op_tree(&mut s, &id(20), &assign(2, "x", 1, &[]));
        assert_eq!(s, before);
        apply_op_tree(&mut s, &id(21), &assign(1, "self", 1, &[]));
        assert_eq!(s, before);
    }

    #[test]
    fn move_leaves_exactly_one_parent() {
        // N = 3 under P = 1; move it to Q = 2.
        let mut s = DocState {
            elements: elements(&[(10, 0, "p", 1), (11, 0, "q", 2), (12, 1, "n", 3)]),
            ..Default::default()
        };
        apply_op_tree(&mut s, &id(20), &assign(2, "n", 3, &[]));
        let refs: Vec<_> = s.elements.iter().filter(|(_, e)| e.val == id(3)).collect();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].1.obj, id(2));
    }

    #[test]
    fn fresh_object_assignment_matches_plain_semantics() {
        let base = DocState {
            elements: elements(&[(10, 0, "a", 1)]),
            ..Default::default()
        };
        let op = assign(1, "k", 5, &[]);
        let mut tree = base.clone();
        apply_op_tree(&mut tree, &id(20), &op);
        assert_eq!(tree, base.apply(&id(20), &op));
    }

    /// root -> {A -> C, B}, as objects 1 (A), 3 (B), 5 (C) made by node "a".
    fn crossed_moves_base() -> OpSet {
        let mut ops = TreeConfig::new(RootKind::Map).seed();
        let a = |c: u64| OpId::new(c, "a");
        let root = OpId::root();
        let steps: Vec<(u64, Operation)> = vec![
            (1, Operation::MakeMap),
            (2, Operation::Assign { obj: root.clone(), key: Key::Map("A".into()), val: a(1), prev: BTreeSet::new() }),
            (3, Operation::MakeMap),
            (4, Operation::Assign { obj: root, key: Key::Map("B".into()), val: a(3), prev: BTreeSet::new() }),
            (5, Operation::MakeMap),
            (6, Operation::Assign { obj: a(1), key: Key::Map("C".into()), val: a(5), prev: BTreeSet::new() }),
        ];
        for (c, op) in steps {
            ops.insert(a(c), op).unwrap();
        }
        ops
    }

    fn parent_of(state: &DocState, child: u64) -> Vec<OpId> {
        state
            .elements
            .iter()
            .filter(|(_, e)| e.val == id(child))
            .map(|(_, e)| e.obj.clone())
            .collect()
    }

    #[test]
    fn cyclic_move_conflict_keeps_the_earlier_move() {
        let cfg = TreeConfig::new(RootKind::Map);
        // "p" < "q", so whichever move node "p" makes is applied first
        for (b_under_a, a_under_b) in [("p", "q"), ("q", "p")] {
            let mut ops = crossed_moves_base();
            let mv = |obj: u64, val: u64| Operation::Assign {
                obj: id(obj),
                key: Key::Map("m".into()),
                val: id(val),
                prev: BTreeSet::new(),
            };
            ops.insert(OpId::new(7, b_under_a), mv(1, 3)).unwrap();
            ops.insert(OpId::new(7, a_under_b), mv(3, 1)).unwrap();
            let state = interpret_tree(&ops);
            assert!(check_tree_invariants(&state, &cfg).is_ok());
            assert_eq!(parent_of(&state, 5), vec![id(1)]);
            if b_under_a == "p" {
                // B moved under A: root -> A -> {B, C}
                assert_eq!(parent_of(&state, 1), vec![OpId::root()]);
                assert_eq!(parent_of(&state, 3), vec![id(1)]);
            } else {
                // A moved under B: root -> B -> A -> C
                assert_eq!(parent_of(&state, 3), vec![OpId::root()]);
                assert_eq!(parent_of(&state, 1), vec![id(3)]);
            }
        }
    }

    #[test]
    fn same_object_moved_twice_lands_where_the_greater_id_put_it() {
        let mut ops = crossed_moves_base();
        let mv = |obj: OpId| Operation::Assign {
            obj,
            key: Key::Map("m".into()),
            val: id(5),
            prev: BTreeSet::new(),
        };
        ops.insert(OpId::new(7, "p"), mv(id(3))).unwrap();
        ops.insert(OpId::new(7, "q"), mv(OpId::root())).unwrap();
        let state = interpret_tree(&ops);
        assert_eq!(parent_of(&state, 5), vec![OpId::root()]);
        assert!(check_tree_invariants(&state, &TreeConfig::new(RootKind::Map)).is_ok());
    }

    // The cycle guard only looks at ancestors of `obj`, so a detached object
    // can adopt the root. The invariant checker is what catches this.
    #[test]
    fn root_assigned_under_a_detached_object_is_flagged() {
        let cfg = TreeConfig::new(RootKind::Map);
        let mut ops = cfg.seed();
        ops.insert(id(1), Operation::MakeMap).unwrap();
        ops.insert(
            id(2),
            Operation::Assign {
                obj: id(1),
                key: Key::Map("up".into()),
                val: OpId::root(),
                prev: BTreeSet::new(),
            },
        )
        .unwrap();
        let report = check_tree_invariants(&interpret_tree(&ops), &cfg);
        assert_eq!(
            report.violations,
            vec![TreeViolation::RootHasParent { assignment: id(2) }]
        );
    }
}
