use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use opsets::codec::{id_from_json, id_json, materialized_json, parse_log, serialize_log};
use opsets::gen;
use opsets::listspec::{self, AStrongConfig, InsOp, Interleaving, PreconditionError};
use opsets::rga::{check_rga_equivalence, RgaVerdict};
use opsets::sim::{self, insertion_log, Partition, SimConfig, Workload};
use opsets::tree::{check_tree_invariants, RootKind, TreeConfig, TreeReport};
use opsets::{Editor, MaterializedValue, OpId, OpSet, Operation, Semantics, ValueSpec};

use crate::io::{parse_id, read_input, write_output};
use crate::{Mode, Register, SimArgs, TrialArgs, ViewArgs, WorkloadArg};

/// How a successful run ended: cleanly, or with a property violation that
/// has already been reported.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Violation,
}

type CmdResult = Result<Outcome, String>;

fn load(path: &str) -> Result<OpSet, String> {
    parse_log(&read_input(path)?).map_err(|e| format!("{path}: {e}"))
}

fn print_json(v: &impl Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(v).map_err(|e| e.to_string())?;
    write_output("-", &format!("{text}\n"))
}

fn outcome(ok: bool) -> Outcome {
    if ok {
        Outcome::Ok
    } else {
        Outcome::Violation
    }
}

struct View {
    root: OpId,
    semantics: Semantics,
    tree: Option<TreeConfig>,
}

impl View {
    fn new(args: &ViewArgs) -> Result<Self, String> {
        let root = parse_id(&args.root)?;
        let semantics = match (args.mode, args.register) {
            (Mode::Tree, _) => Semantics::Tree,
            (_, Register::Mv) => Semantics::MultiValue,
            (_, Register::Lww) => Semantics::LastWriterWins,
        };
        Ok(View {
            root,
            semantics,
            tree: None,
        })
    }

    /// Checks that the root exists with the kind the mode asks for.
    fn bind(&mut self, ops: &OpSet, mode: Mode) -> Result<(), String> {
        let kind = match (ops.get(&self.root), mode) {
            (Some(Operation::MakeMap), Mode::Map | Mode::Tree) => RootKind::Map,
            (Some(Operation::MakeList), Mode::List | Mode::Tree) => RootKind::List,
            (None, _) => return Err(format!("root {} is not in the log", self.root)),
            (Some(op), _) => {
                return Err(format!("root {} is a {} operation, not a {mode:?}", self.root, op.tag()))
            }
        };
        if mode == Mode::Tree {
            self.tree = Some(TreeConfig {
                root: self.root.clone(),
                kind,
            });
        }
        Ok(())
    }

    fn document(&self, ops: &OpSet) -> Result<Value, String> {
        self.semantics
            .materialize(ops, &self.root)
            .map(|v| materialized_json(&v))
            .map_err(|e| e.to_string())
    }

    fn tree_report(&self, ops: &OpSet) -> Option<TreeReport> {
        let cfg = self.tree.as_ref()?;
        Some(check_tree_invariants(&self.semantics.interpret(ops), cfg))
    }
}

pub fn interp(path: &str, args: &ViewArgs) -> CmdResult {
    let ops = load(path)?;
    let mut view = View::new(args)?;
    view.bind(&ops, args.mode)?;
    let document = view.document(&ops)?;
    match view.tree_report(&ops) {
        None => {
            print_json(&document)?;
            Ok(Outcome::Ok)
        }
        Some(report) => {
            let ok = report.is_ok();
            print_json(&json!({ "document": document, "invariants": report }))?;
            Ok(outcome(ok))
        }
    }
}

/// One JSON line per operation: the step number, the operation's ID and the
/// document after it. Before the root exists the document is `null`.
pub fn history(path: &str, args: &ViewArgs) -> CmdResult {
    let ops = load(path)?;
    let mut view = View::new(args)?;
    view.bind(&ops, args.mode)?;
    let mut out = String::new();
    let mut ok = true;
    for (i, (id, _)) in ops.linearize().enumerate() {
        let prefix = ops.prefix(i + 1);
        let mut line = json!({
            "step": i + 1,
            "id": id_json(id),
            "document": if prefix.contains(&view.root) { view.document(&prefix)? } else { Value::Null },
        });
        if let Some(report) = view.tree_report(&prefix) {
            ok &= report.is_ok();
            line["invariants"] = serde_json::to_value(report).map_err(|e| e.to_string())?;
        }
        out.push_str(&line.to_string());
        out.push('\n');
    }
    write_output("-", &out)?;
    Ok(outcome(ok))
}

pub fn merge(paths: &[String], output: &str) -> CmdResult {
    let mut all = OpSet::new();
    for path in paths {
        let ops = load(path)?;
        all.merge_from(&ops).map_err(|e| format!("{path}: {e}"))?;
    }
    write_output(output, &serialize_log(&all))?;
    Ok(Outcome::Ok)
}

fn parse_partition(s: &str) -> Result<Partition, String> {
    let bad = || format!("partition {s:?} is not FROM:TO:GROUPS (e.g. 10:40:0,1/2)");
    let mut parts = s.splitn(3, ':');
    let (Some(from), Some(to), Some(groups)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(bad());
    };
    let groups = groups
        .split('/')
        .map(|g| g.split(',').map(|n| n.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad())?;
    Ok(Partition {
        from: from.parse().map_err(|_| bad())?,
        to: to.parse().map_err(|_| bad())?,
        groups,
    })
}

fn sim_config(args: &SimArgs, seed: u64) -> Result<SimConfig, String> {
    let cfg = SimConfig {
        nodes: args.nodes,
        ops: args.ops,
        seed,
        loss: args.loss,
        dup: args.dup,
        max_delay: args.max_delay,
        partitions: args
            .partitions
            .iter()
            .map(|p| parse_partition(p))
            .collect::<Result<_, _>>()?,
        workload: match args.workload {
            WorkloadArg::Map => Workload::MapEdits,
            WorkloadArg::List => Workload::ListEdits,
            WorkloadArg::Tree => Workload::TreeMoves,
            WorkloadArg::Text => Workload::TextTyping,
        },
        anti_entropy: !args.no_anti_entropy,
    };
    let cfg = if args.random_partition {
        cfg.with_random_partition()
    } else {
        cfg
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn sim(args: &SimArgs, output: &str) -> CmdResult {
    let trace = sim::run_sim(&sim_config(args, args.seed)?).map_err(|e| e.to_string())?;
    let text = serde_json::to_string_pretty(&trace).map_err(|e| e.to_string())?;
    write_output(output, &format!("{text}\n"))?;
    Ok(Outcome::Ok)
}

pub fn gen_crdt_log(seed: u64, max_ops: usize) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log = gen::crdt_log(&mut rng, max_ops);
    print_json(&crdt_log_json(&log))?;
    Ok(Outcome::Ok)
}

fn crdt_log_json(log: &[InsOp<OpId>]) -> Value {
    let ops: Vec<Value> = log
        .iter()
        .map(|op| json!({ "id": id_json(&op.id), "ref": op.reference.as_ref().map(id_json) }))
        .collect();
    json!({ "ops": ops })
}

fn parse_crdt_log(bytes: &[u8]) -> Result<Vec<InsOp<OpId>>, String> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| format!("malformed JSON: {e}"))?;
    let ops = doc
        .get("ops")
        .and_then(Value::as_array)
        .ok_or("missing \"ops\" array")?;
    ops.iter()
        .enumerate()
        .map(|(i, op)| {
            let id = id_from_json(op.get("id").unwrap_or(&Value::Null)).map_err(|e| format!("op {i}: {e}"))?;
            let reference = match op.get("ref") {
                None | Some(Value::Null) => None,
                Some(r) => Some(id_from_json(r).map_err(|e| format!("op {i}: {e}"))?),
            };
            Ok(InsOp { id, reference })
        })
        .collect()
}

fn ids_json(ids: &[OpId]) -> Vec<Value> {
    ids.iter().map(id_json).collect()
}

/// Renders a list of single-character strings as text, taking the first
/// value of each slot.
fn list_text(v: &MaterializedValue) -> String {
    let MaterializedValue::List(items) = v else {
        return String::new();
    };
    items
        .iter()
        .filter_map(|slot| match slot.first() {
            Some(MaterializedValue::Primitive(opsets::PrimitiveValue::Str(s))) => Some(s.as_str()),
            _ => None,
        })
        .collect()
}

/// "Hello!" typed by one node, then " Alice" and " Charlie" typed after the
/// "o" by two nodes that have not seen each other's edits.
pub fn check_greeting() -> CmdResult {
    let list = OpId::root();
    let type_run = |ops: &OpSet, editor: &Editor, text: &str, at: usize| -> Result<(OpSet, Vec<OpId>), String> {
        let mut ops = ops.clone();
        let mut ids = Vec::new();
        for (i, ch) in text.chars().enumerate() {
            ops = editor
                .ins_list_index(&ops, &list, at + i, &ValueSpec::from(ch.to_string()))
                .map_err(|e| e.to_string())?;
            let elem = ops
                .linearize()
                .rev()
                .find(|(_, op)| matches!(op, Operation::InsertAfter(_)))
                .map(|(id, _)| id.clone())
                .expect("just inserted");
            ids.push(elem);
        }
        Ok((ops, ids))
    };
    let base = TreeConfig::new(RootKind::List).seed();
    let (hello, _) = type_run(&base, &Editor::new("base"), "Hello!", 0)?;
    let (left, xs) = type_run(&hello, &Editor::new("alice"), " Alice", 5)?;
    let (right, ys) = type_run(&hello, &Editor::new("charlie"), " Charlie", 5)?;
    let merged = left.merge(&right).map_err(|e| e.to_string())?;

    let log = insertion_log(&merged, &list);
    let runs = |ids: &[OpId]| -> Vec<InsOp<OpId>> {
        ids.iter().map(|id| log.iter().find(|op| &op.id == id).expect("in log").clone()).collect()
    };
    let (xs_ops, ys_ops) = (runs(&xs), runs(&ys));
    let start = xs_ops[0].reference.clone();
    let verdict = listspec::check_no_interleaving(&log, &xs_ops, &ys_ops, start.as_ref())
        .map_err(|e| e.to_string())?;
    let doc = Semantics::MultiValue
        .materialize(&merged, &list)
        .map_err(|e| e.to_string())?;
    let ok = !verdict.is_violation();
    print_json(&json!({
        "check": "no-interleaving",
        "scenario": "greeting",
        "left": "Hello Alice!",
        "right": "Hello Charlie!",
        "merged": list_text(&doc),
        "verdict": verdict,
        "passed": ok,
    }))?;
    Ok(outcome(ok))
}

pub fn check_log_interleaving(path: &str, list: &str, xs: &[String], ys: &[String]) -> CmdResult {
    let ops = load(path)?;
    let list = parse_id(list)?;
    if !matches!(ops.get(&list), Some(Operation::MakeList)) {
        return Err(format!("{list} is not a list in {path}"));
    }
    let log = insertion_log(&ops, &list);
    let find = |names: &[String]| -> Result<Vec<InsOp<OpId>>, String> {
        names
            .iter()
            .map(|s| {
                let id = parse_id(s)?;
                log.iter()
                    .find(|op| op.id == id)
                    .cloned()
                    .ok_or_else(|| format!("{id} is not an insertion into {list}"))
            })
            .collect()
    };
    let (xs_ops, ys_ops) = (find(xs)?, find(ys)?);
    let start = xs_ops.first().and_then(|op| op.reference.clone());
    let verdict = listspec::check_no_interleaving(&log, &xs_ops, &ys_ops, start.as_ref())
        .map_err(|e: PreconditionError| e.to_string())?;
    let ok = !verdict.is_violation();
    print_json(&json!({
        "check": "no-interleaving",
        "start": start.as_ref().map(id_json),
        "verdict": verdict,
        "passed": ok,
    }))?;
    Ok(outcome(ok))
}

pub fn check_random_interleaving(t: TrialArgs) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut first_violation = None;
    for trial in 0..t.trials {
        let exists = rng.gen_bool(0.9);
        let tr = gen::interleaving_trial(&mut rng, 20, 8, exists);
        let verdict = listspec::check_no_interleaving(&tr.ops, &tr.xs, &tr.ys, tr.start.as_ref())
            .map_err(|e| format!("trial {trial}: generator broke a precondition: {e}"))?;
        let key = match &verdict {
            Interleaving::BlockXY => "block_xy",
            Interleaving::BlockYX => "block_yx",
            Interleaving::StartMissing => "start_missing",
            Interleaving::Violation { .. } => "violation",
        };
        *counts.entry(key).or_default() += 1;
        if verdict.is_violation() && first_violation.is_none() {
            first_violation = Some(json!({ "trial": trial, "verdict": verdict }));
        }
    }
    let ok = first_violation.is_none();
    print_json(&json!({
        "check": "no-interleaving",
        "seed": t.seed,
        "trials": t.trials,
        "verdicts": counts,
        "first_violation": first_violation,
        "passed": ok,
    }))?;
    Ok(outcome(ok))
}

pub fn check_astrong(t: TrialArgs, max_ops: usize) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let cfg = AStrongConfig {
        seed: t.seed,
        ..AStrongConfig::default()
    };
    let names = ["1a", "1b", "1c", "2"];
    let mut passed = [0usize; 4];
    let mut checked = [0usize; 4];
    let mut witnesses: BTreeMap<&str, Value> = BTreeMap::new();
    for trial in 0..t.trials {
        let log = gen::astrong_log(&mut rng, max_ops);
        let r = listspec::check_astrong(&log, &cfg).map_err(|e| format!("trial {trial}: {e}"))?;
        let conds = [
            &r.inserted_but_not_deleted,
            &r.list_order_consistent,
            &r.correct_position,
            &r.strict_total_order,
        ];
        for (i, c) in conds.iter().enumerate() {
            checked[i] += c.checked;
            if c.passed {
                passed[i] += 1;
            } else {
                witnesses
                    .entry(names[i])
                    .or_insert_with(|| json!({ "trial": trial, "witness": c.witness }));
            }
        }
    }
    let conditions: BTreeMap<&str, Value> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            (*n, json!({ "passed": passed[i] == t.trials, "logs_passed": passed[i], "checks": checked[i] }))
        })
        .collect();
    let ok = witnesses.is_empty();
    print_json(&json!({
        "check": "astrong",
        "seed": t.seed,
        "trials": t.trials,
        "conditions": conditions,
        "witnesses": witnesses,
        "passed": ok,
    }))?;
    Ok(outcome(ok))
}

pub fn check_rga(t: TrialArgs, log: Option<&str>, max_ops: usize) -> CmdResult {
    if let Some(path) = log {
        let log = parse_crdt_log(&read_input(path)?).map_err(|e| format!("{path}: {e}"))?;
        let verdict = check_rga_equivalence(&log).map_err(|e| format!("{path}: {e}"))?;
        let ok = verdict == RgaVerdict::Equal;
        let detail = match &verdict {
            RgaVerdict::Equal => json!({ "verdict": "equal" }),
            RgaVerdict::Mismatch { rga, spec } => {
                json!({ "verdict": "mismatch", "rga": ids_json(rga), "spec": ids_json(spec) })
            }
        };
        print_json(&json!({ "check": "rga", "ops": log.len(), "result": detail, "passed": ok }))?;
        return Ok(outcome(ok));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let mut mismatches = 0usize;
    let mut first = None;
    for trial in 0..t.trials {
        let log = gen::crdt_log(&mut rng, max_ops);
        if let RgaVerdict::Mismatch { .. } = check_rga_equivalence(&log).map_err(|e| e.to_string())? {
            mismatches += 1;
            first.get_or_insert_with(|| json!({ "trial": trial, "log": crdt_log_json(&log) }));
        }
    }
    let ok = mismatches == 0;
    print_json(&json!({
        "check": "rga",
        "seed": t.seed,
        "trials": t.trials,
        "mismatches": mismatches,
        "first_mismatch": first,
        "passed": ok,
    }))?;
    Ok(outcome(ok))
}

pub fn check_convergence(trials: usize, args: &SimArgs) -> CmdResult {
    let mut runs = Vec::new();
    let mut ok = true;
    for seed in args.seed..args.seed + trials as u64 {
        let cfg = sim_config(args, seed)?;
        let trace = sim::run_sim(&cfg).map_err(|e| e.to_string())?;
        let report = sim::check_convergence(&trace).map_err(|e| e.to_string())?;
        ok &= !report.is_failure();
        runs.push(json!({ "seed": seed, "report": report }));
    }
    print_json(&json!({
        "check": "convergence",
        "trials": trials,
        "runs": runs,
        "passed": ok,
    }))?;
    Ok(outcome(ok))
}
