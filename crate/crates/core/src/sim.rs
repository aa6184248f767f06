//! A deterministic, single-threaded network simulator.
//!
//! Each step one random node makes an edit and broadcasts the new operations.
//! The network loses, duplicates, delays (and so reorders) messages and drops
//! traffic across partition boundaries. Once all edits are made and every
//! in-flight message has landed, an optional anti-entropy phase exchanges full
//! OpSets pairwise until nothing changes.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::codec::{materialized_json, serialize_log};
use crate::document::Semantics;
use crate::id::OpId;
use crate::listspec::{check_no_interleaving, InsOp, Interleaving, PreconditionError};
use crate::op::{MapKey, Operation};
use crate::opgen::{Editor, OpGenError, ValueSpec};
use crate::opset::OpSet;
use crate::tree::{check_tree_invariants, RootKind, TreeConfig, TreeViolation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    MapEdits,
    ListEdits,
    TreeMoves,
    TextTyping,
}

impl Workload {
    pub fn semantics(self) -> Semantics {
        match self {
            Workload::TreeMoves => Semantics::Tree,
            _ => Semantics::MultiValue,
        }
    }

    fn root_kind(self) -> RootKind {
        match self {
            Workload::MapEdits | Workload::TreeMoves => RootKind::Map,
            Workload::ListEdits | Workload::TextTyping => RootKind::List,
        }
    }
}

impl std::str::FromStr for Workload {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "map" | "map-edits" | "mapEdits" => Ok(Workload::MapEdits),
            "list" | "list-edits" | "listEdits" => Ok(Workload::ListEdits),
            "tree" | "tree-moves" | "treeMoves" => Ok(Workload::TreeMoves),
            "text" | "text-typing" | "textTyping" => Ok(Workload::TextTyping),
            other => Err(format!("unknown workload {other:?}")),
        }
    }
}

/// Steps `from..to` during which only nodes in the same group can talk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub from: u64,
    pub to: u64,
    pub groups: Vec<Vec<usize>>,
}

impl Partition {
    fn separates(&self, step: u64, a: usize, b: usize) -> bool {
        if step < self.from || step >= self.to {
            return false;
        }
        let group = |n: usize| self.groups.iter().position(|g| g.contains(&n));
        group(a) != group(b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub nodes: usize,
    pub ops: usize,
    pub seed: u64,
    pub loss: f64,
    pub dup: f64,
    pub max_delay: u64,
    pub partitions: Vec<Partition>,
    pub workload: Workload,
    /// Run the anti-entropy phase at the end. Disabling it yields a trace
    /// cut off before retransmission.
    pub anti_entropy: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            nodes: 3,
            ops: 100,
            seed: 0,
            loss: 0.0,
            dup: 0.0,
            max_delay: 3,
            partitions: Vec::new(),
            workload: Workload::MapEdits,
            anti_entropy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("node {node} failed to generate an edit: {source}")]
    Edit {
        node: String,
        #[source]
        source: OpGenError,
    },
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.nodes == 0 {
            return bad("node count must be positive".into());
        }
        if self.ops == 0 {
            return bad("op count must be positive".into());
        }
        for (name, p) in [("loss", self.loss), ("dup", self.dup)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} probability {p} is outside [0, 1]"));
            }
        }
        for p in &self.partitions {
            if p.from > p.to {
                return bad(format!("partition window {}..{} is reversed", p.from, p.to));
            }
            let mut seen = BTreeSet::new();
            for &n in p.groups.iter().flatten() {
                if n >= self.nodes || !seen.insert(n) {
                    return bad(format!("partition groups {:?} do not partition the nodes", p.groups));
                }
            }
            if seen.len() != self.nodes {
                return bad(format!("partition groups {:?} do not cover every node", p.groups));
            }
        }
        Ok(())
    }

    /// A config with one partition window splitting the nodes in two,
    /// chosen from `seed`. Useful for sweeping many seeds.
    pub fn with_random_partition(mut self) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9a27_1710);
        if self.nodes >= 2 {
            let from = rng.gen_range(0..=self.ops as u64 / 2);
            let to = from + rng.gen_range(1..=self.ops as u64 / 2 + 1);
            let mut nodes: Vec<usize> = (0..self.nodes).collect();
            nodes.shuffle(&mut rng);
            let cut = rng.gen_range(1..self.nodes);
            let mut a = nodes[..cut].to_vec();
            let mut b = nodes[cut..].to_vec();
            a.sort_unstable();
            b.sort_unstable();
            self.partitions = vec![Partition {
                from,
                to,
                groups: vec![a, b],
            }];
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Generate { ids: Vec<OpId> },
    Send { to: String, msg: u64 },
    Drop { to: String, msg: u64, reason: DropReason },
    Duplicate { to: String, msg: u64 },
    Deliver { from: String, msg: u64, new_ops: usize },
    Merge { from: String, new_ops: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Loss,
    Partition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    pub step: u64,
    pub node: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeState {
    pub node: String,
    #[serde(skip)]
    pub ops: OpSet,
    /// The node's OpSet as a canonical log.
    pub log: String,
    pub document: Value,
}

/// One contiguous run of characters typed by a node in the text workload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypingRun {
    pub node: String,
    pub start: Option<OpId>,
    pub elements: Vec<OpId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepViolation {
    pub step: u64,
    pub node: String,
    pub violation: TreeViolation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimTrace {
    pub config: SimConfig,
    pub events: Vec<Event>,
    pub anti_entropy_done: bool,
    pub final_states: Vec<NodeState>,
    pub runs: Vec<TypingRun>,
    /// Tree invariant failures seen at any node after any step.
    pub tree_violations: Vec<StepViolation>,
}

struct Message {
    id: u64,
    deliver_at: u64,
    from: usize,
    to: usize,
    ops: OpSet,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    names: Vec<String>,
    replicas: Vec<OpSet>,
    editors: Vec<Editor>,
    root: TreeConfig,
    queue: Vec<Message>,
    next_msg: u64,
    events: Vec<Event>,
    runs: Vec<TypingRun>,
    /// Index into `runs` of each node's current run.
    active_run: Vec<Option<usize>>,
    tree_violations: Vec<StepViolation>,
}

pub fn run_sim(cfg: &SimConfig) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    let names: Vec<String> = (0..cfg.nodes).map(|i| format!("n{i}")).collect();
    let root = TreeConfig::new(cfg.workload.root_kind());
    let mut sim = Sim {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        replicas: vec![root.seed(); cfg.nodes],
        editors: names
            .iter()
            .map(|n| Editor::new(n.clone()).with_semantics(cfg.workload.semantics()))
            .collect(),
        names,
        root,
        queue: Vec::new(),
        next_msg: 0,
        events: Vec::new(),
        runs: Vec::new(),
        active_run: vec![None; cfg.nodes],
        tree_violations: Vec::new(),
    };

    let mut step = 0u64;
    for _ in 0..cfg.ops {
        sim.deliver_due(step);
        let node = sim.rng.gen_range(0..cfg.nodes);
        sim.generate(step, node)?;
        step += 1;
    }
    while !sim.queue.is_empty() {
        sim.deliver_due(step);
        step += 1;
    }
    if cfg.anti_entropy {
        sim.anti_entropy(step);
    }

    let semantics = cfg.workload.semantics();
    let final_states = sim
        .replicas
        .iter()
        .zip(&sim.names)
        .map(|(ops, node)| NodeState {
            node: node.clone(),
            log: serialize_log(ops),
            document: render(semantics, ops, &sim.root.root),
            ops: ops.clone(),
        })
        .collect();
    Ok(SimTrace {
        config: cfg.clone(),
        events: sim.events,
        anti_entropy_done: cfg.anti_entropy,
        final_states,
        runs: sim.runs,
        tree_violations: sim.tree_violations,
    })
}

fn render(semantics: Semantics, ops: &OpSet, root: &OpId) -> Value {
    match semantics.materialize(ops, root) {
        Ok(v) => materialized_json(&v),
        Err(e) => serde_json::json!({ "$error": e.to_string() }),
    }
}

impl Sim<'_> {
    fn log(&mut self, step: u64, node: usize, kind: EventKind) {
        self.events.push(Event {
            step,
            node: self.names[node].clone(),
            kind,
        });
    }

    fn generate(&mut self, step: u64, node: usize) -> Result<(), SimError> {
        let before = self.replicas[node].clone();
        let after = self
            .edit(node)
            .map_err(|source| SimError::Edit {
                node: self.names[node].clone(),
                source,
            })?;
        let mut fresh = OpSet::new();
        for (id, op) in after.linearize() {
            if !before.contains(id) {
                fresh.insert(id.clone(), op.clone()).expect("subset of a valid OpSet");
            }
        }
        self.replicas[node] = after;
        let ids: Vec<OpId> = fresh.ids().cloned().collect();
        self.log(step, node, EventKind::Generate { ids });
        self.check_tree(step, node);
        self.broadcast(step, node, fresh);
        Ok(())
    }

    fn broadcast(&mut self, step: u64, from: usize, ops: OpSet) {
        for to in 0..self.cfg.nodes {
            if to == from {
                continue;
            }
            let msg = self.next_msg;
            self.next_msg += 1;
            let to_name = self.names[to].clone();
            if self.cfg.partitions.iter().any(|p| p.separates(step, from, to)) {
                let reason = DropReason::Partition;
                self.log(step, from, EventKind::Drop { to: to_name, msg, reason });
                continue;
            }
            self.log(step, from, EventKind::Send { to: to_name.clone(), msg });
            // draw every random number unconditionally so that the schedule
            // of one message does not shift the stream for the next
            let lost = self.rng.gen_bool(self.cfg.loss);
            let dup = self.rng.gen_bool(self.cfg.dup);
            let delays = [
                self.rng.gen_range(0..=self.cfg.max_delay),
                self.rng.gen_range(0..=self.cfg.max_delay),
            ];
            if lost {
                let reason = DropReason::Loss;
                self.log(step, from, EventKind::Drop { to: to_name.clone(), msg, reason });
            } else {
                self.enqueue(msg, step + 1 + delays[0], from, to, ops.clone());
            }
            if dup {
                self.log(step, from, EventKind::Duplicate { to: to_name, msg });
                self.enqueue(msg, step + 1 + delays[1], from, to, ops.clone());
            }
        }
    }

    fn enqueue(&mut self, id: u64, deliver_at: u64, from: usize, to: usize, ops: OpSet) {
        self.queue.push(Message {
            id,
            deliver_at,
            from,
            to,
            ops,
        });
    }

    fn deliver_due(&mut self, step: u64) {
        let (mut due, rest): (Vec<Message>, Vec<Message>) =
            self.queue.drain(..).partition(|m| m.deliver_at <= step);
        self.queue = rest;
        due.sort_by_key(|m| (m.deliver_at, m.id, m.to));
        for m in due {
            let new_ops = self.replicas[m.to]
                .merge_from(&m.ops)
                .expect("replicas generate disjoint IDs");
            let from = self.names[m.from].clone();
            self.log(step, m.to, EventKind::Deliver { from, msg: m.id, new_ops });
            if new_ops > 0 {
                self.check_tree(step, m.to);
            }
        }
    }

    fn anti_entropy(&mut self, step: u64) {
        loop {
            let mut changed = false;
            for a in 0..self.cfg.nodes {
                for b in 0..self.cfg.nodes {
                    if a == b {
                        continue;
                    }
                    let src = self.replicas[b].clone();
                    let new_ops = self.replicas[a]
                        .merge_from(&src)
                        .expect("replicas generate disjoint IDs");
                    if new_ops > 0 {
                        changed = true;
                        let from = self.names[b].clone();
                        self.log(step, a, EventKind::Merge { from, new_ops });
                        self.check_tree(step, a);
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn check_tree(&mut self, step: u64, node: usize) {
        if self.cfg.workload != Workload::TreeMoves {
            return;
        }
        let state = Semantics::Tree.interpret(&self.replicas[node]);
        for violation in check_tree_invariants(&state, &self.root).violations {
            self.tree_violations.push(StepViolation {
                step,
                node: self.names[node].clone(),
                violation,
            });
        }
    }

    fn edit(&mut self, node: usize) -> Result<OpSet, OpGenError> {
        let ops = &self.replicas[node];
        let editor = &self.editors[node];
        let root = self.root.root.clone();
        let rng = &mut self.rng;
        match self.cfg.workload {
            Workload::MapEdits => {
                let maps = objects(ops, |op| matches!(op, Operation::MakeMap));
                let map = maps.choose(rng).unwrap();
                let key = MapKey::from(*["a", "b", "c", "d"].choose(rng).unwrap());
                match rng.gen_range(0..10) {
                    0..=5 => editor.set_map_key(ops, map, key, &ValueSpec::from(rng.gen_range(0..100i64))),
                    6 => editor.set_map_key(ops, map, key, &ValueSpec::EmptyMap),
                    _ => editor.remove_map_key(ops, map, key),
                }
            }
            Workload::ListEdits => {
                let len = visible(ops, &root)?.len();
                let choice = if len == 0 { 0 } else { rng.gen_range(0..10) };
                let value = ValueSpec::from(rng.gen_range(0..100i64));
                match choice {
                    0..=5 => editor.ins_list_index(ops, &root, rng.gen_range(0..=len), &value),
                    6..=7 => editor.set_list_index(ops, &root, rng.gen_range(0..len), &value),
                    _ => editor.remove_list_index(ops, &root, rng.gen_range(0..len)),
                }
            }
            Workload::TreeMoves => {
                let maps = objects(ops, |op| matches!(op, Operation::MakeMap));
                let parent = maps.choose(rng).unwrap().clone();
                let key = MapKey::from(*["x", "y", "z"].choose(rng).unwrap());
                let movable: Vec<&OpId> = maps.iter().filter(|m| !m.is_root()).collect();
                let value = if movable.is_empty() || rng.gen_bool(0.4) {
                    ValueSpec::EmptyMap
                } else {
                    ValueSpec::Existing((*movable.choose(rng).unwrap()).clone())
                };
                editor.set_map_key(ops, &parent, key, &value)
            }
            Workload::TextTyping => self.type_char(node),
        }
    }

    /// Continues the node's current run, or starts a new one at a random
    /// position with probability 1/5.
    fn type_char(&mut self, node: usize) -> Result<OpSet, OpGenError> {
        let ops = &self.replicas[node];
        let editor = &self.editors[node];
        let root = self.root.root.clone();
        let visible = visible(ops, &root)?;
        let letter = (b'a' + self.rng.gen_range(0..26u8)) as char;
        let value = ValueSpec::from(letter.to_string());

        let continuing = self.active_run[node]
            .filter(|_| !self.rng.gen_bool(0.2))
            .and_then(|r| {
                let last = self.runs[r].elements.last()?;
                visible.iter().position(|e| e == last).map(|p| (r, p + 1))
            });
        let (run, index) = match continuing {
            Some(found) => found,
            None => {
                let index = self.rng.gen_range(0..=visible.len());
                let start = if index == 0 { None } else { Some(visible[index - 1].clone()) };
                self.runs.push(TypingRun {
                    node: self.names[node].clone(),
                    start,
                    elements: Vec::new(),
                });
                self.active_run[node] = Some(self.runs.len() - 1);
                (self.runs.len() - 1, index)
            }
        };
        let out = editor.ins_list_index(ops, &root, index, &value)?;
        let elem = out
            .linearize()
            .rev()
            .find(|(_, op)| matches!(op, Operation::InsertAfter(_)))
            .map(|(id, _)| id.clone())
            .expect("an insertion was just generated");
        self.runs[run].elements.push(elem);
        Ok(out)
    }
}

fn objects(ops: &OpSet, keep: impl Fn(&Operation) -> bool) -> Vec<OpId> {
    ops.linearize()
        .filter(|(_, op)| keep(op))
        .map(|(id, _)| id.clone())
        .collect()
}

fn visible(ops: &OpSet, list: &OpId) -> Result<Vec<OpId>, OpGenError> {
    Ok(Semantics::MultiValue.interpret(ops).visible_list_elements(list)?)
}

/// The list insertions in `ops` as a plain insertion log, with insertions at
/// the head of `list` referencing nothing.
pub fn insertion_log(ops: &OpSet, list: &OpId) -> Vec<InsOp<OpId>> {
    ops.linearize()
        .filter_map(|(id, op)| match op {
            Operation::InsertAfter(r) => Some(InsOp {
                id: id.clone(),
                reference: (r != list).then(|| r.clone()),
            }),
            _ => None,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Converged,
    /// Replicas differ, but the trace stops before anti-entropy, so this is
    /// expected rather than a failure.
    Pending,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunPairVerdict {
    pub xs: usize,
    pub ys: usize,
    pub verdict: Interleaving,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConvergenceReport {
    #[serde(flatten)]
    pub status: ConvergenceStatus,
    /// Node pairs whose OpSets differ.
    pub opset_mismatches: Vec<(String, String)>,
    /// Node pairs whose documents differ.
    pub document_mismatches: Vec<(String, String)>,
    pub tree_violations: Vec<StepViolation>,
    /// Final tree checks per node, for the tree workload.
    pub final_tree_violations: Vec<(String, TreeViolation)>,
    /// No-interleaving verdicts for concurrent runs from different nodes
    /// sharing a start position, for the text workload.
    pub interleaving: Vec<RunPairVerdict>,
}

impl ConvergenceReport {
    pub fn is_failure(&self) -> bool {
        self.status == ConvergenceStatus::Diverged
            || !self.tree_violations.is_empty()
            || !self.final_tree_violations.is_empty()
            || self.interleaving.iter().any(|r| r.verdict.is_violation())
    }
}

pub fn check_convergence(trace: &SimTrace) -> Result<ConvergenceReport, PreconditionError> {
    let states = &trace.final_states;
    let mut opset_mismatches = Vec::new();
    let mut document_mismatches = Vec::new();
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            if a.ops != b.ops {
                opset_mismatches.push((a.node.clone(), b.node.clone()));
            }
            if a.document != b.document {
                document_mismatches.push((a.node.clone(), b.node.clone()));
            }
        }
    }
    let agree = opset_mismatches.is_empty() && document_mismatches.is_empty();
    let status = match (agree, trace.anti_entropy_done) {
        (true, _) => ConvergenceStatus::Converged,
        (false, true) => ConvergenceStatus::Diverged,
        (false, false) => ConvergenceStatus::Pending,
    };

    let root = TreeConfig::new(trace.config.workload.root_kind());
    let mut final_tree_violations = Vec::new();
    if trace.config.workload == Workload::TreeMoves {
        for s in states {
            let state = Semantics::Tree.interpret(&s.ops);
            for v in check_tree_invariants(&state, &root).violations {
                final_tree_violations.push((s.node.clone(), v));
            }
        }
    }

    let mut interleaving = Vec::new();
    if trace.config.workload == Workload::TextTyping && status == ConvergenceStatus::Converged {
        if let Some(s) = states.first() {
            let log = insertion_log(&s.ops, &root.root);
            let as_run = |run: &TypingRun| -> Vec<InsOp<OpId>> {
                let mut reference = run.start.clone();
                run.elements
                    .iter()
                    .map(|id| {
                        
                        InsOp {
                            id: id.clone(),
                            reference: reference.replace(id.clone()),
                        }
                    })
                    .collect()
            };
            for (i, x) in trace.runs.iter().enumerate() {
                for (j, y) in trace.runs.iter().enumerate().skip(i + 1) {
                    if x.node == y.node || x.start != y.start || x.elements.is_empty() || y.elements.is_empty() {
                        continue;
                    }
                    let verdict = check_no_interleaving(&log, &as_run(x), &as_run(y), x.start.as_ref())?;
                    interleaving.push(RunPairVerdict { xs: i, ys: j, verdict });
                }
            }
        }
    }

    Ok(ConvergenceReport {
        status,
        opset_mismatches,
        document_mismatches,
        tree_violations: trace.tree_violations.clone(),
        final_tree_violations,
        interleaving,
    })
}
