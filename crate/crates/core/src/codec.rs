//! The JSON operation-log format and the JSON rendering of materialized
//! documents.
//!
//! Logs are written canonically: ops sorted by ID, one record per line, fields
//! in a fixed order, LF line endings. Counters above 2^53-1 are written as
//! decimal strings; either form is accepted on input.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::datatypes::MaterializedValue;
use crate::id::OpId;
use crate::op::{Key, MapKey, Operation, PrimitiveValue};
use crate::opset::{OpSet, OpSetError};

pub const LOG_VERSION: u64 = 1;
const MAX_SAFE_INTEGER: u64 = (1 << 53) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("{0}")]
    Header(String),
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
    #[error("record {index}: {source}")]
    OpSet {
        index: usize,
        #[source]
        source: OpSetError,
    },
}

impl CodecError {
    /// The zero-based position of the offending record, if there is one.
    pub fn record_index(&self) -> Option<usize> {
        match self {
            CodecError::Record { index, .. } | CodecError::OpSet { index, .. } => Some(*index),
            _ => None,
        }
    }
}

pub fn parse_log(bytes: &[u8]) -> Result<OpSet, CodecError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| CodecError::Json(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| CodecError::Header("top level must be an object".into()))?;
    match obj.get("version").and_then(Value::as_u64) {
        Some(LOG_VERSION) => {}
        Some(v) => return Err(CodecError::Header(format!("unsupported version {v}"))),
        None => return Err(CodecError::Header("missing numeric \"version\"".into())),
    }
    let records = obj
        .get("ops")
        .and_then(Value::as_array)
        .ok_or_else(|| CodecError::Header("missing \"ops\" array".into()))?;
    let mut ops = OpSet::new();
    for (index, rec) in records.iter().enumerate() {
        let (id, op) = parse_record(rec).map_err(|message| CodecError::Record { index, message })?;
        ops.insert(id, op)
            .map_err(|source| CodecError::OpSet { index, source })?;
    }
    Ok(ops)
}

fn parse_record(rec: &Value) -> Result<(OpId, Operation), String> {
    let rec = rec.as_object().ok_or("record must be an object")?;
    let id = id_from_json(rec.get("id").ok_or("missing \"id\"")?)?;
    let action = rec
        .get("action")
        .and_then(Value::as_object)
        .ok_or("missing \"action\" object")?;
    let field = |name: &str| action.get(name).ok_or(format!("missing \"{name}\""));
    let op = match action.get("t").and_then(Value::as_str) {
        Some("MakeMap") => Operation::MakeMap,
        Some("MakeList") => Operation::MakeList,
        Some("MakeVal") => Operation::MakeVal(parse_prim(field("val")?)?),
        Some("InsertAfter") => Operation::InsertAfter(id_from_json(field("ref")?)?),
        Some("Assign") => Operation::Assign {
            obj: id_from_json(field("obj")?)?,
            key: parse_key(field("key")?)?,
            val: id_from_json(field("val")?)?,
            prev: parse_ids(field("prev")?)?,
        },
        Some("Remove") => Operation::Remove {
            obj: id_from_json(field("obj")?)?,
            key: parse_key(field("key")?)?,
            prev: parse_ids(field("prev")?)?,
        },
        Some(other) => return Err(format!("unknown action tag {other:?}")),
        None => return Err("action is missing a string \"t\"".into()),
    };
    Ok((id, op))
}

/// Reads an ID written as `[counter, node]`; the counter may be a decimal string.
pub fn id_from_json(v: &Value) -> Result<OpId, String> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| format!("ID must be [counter, node], got {v}"))?;
    let counter = match &pair[0] {
        Value::Number(n) => n.as_u64().ok_or_else(|| format!("bad counter {n}"))?,
        Value::String(s) => s.parse::<u64>().map_err(|_| format!("bad counter {s:?}"))?,
        other => return Err(format!("bad counter {other}")),
    };
    let node = pair[1]
        .as_str()
        .ok_or_else(|| format!("node must be a string, got {}", pair[1]))?;
    Ok(OpId::new(counter, node))
}

fn parse_ids(v: &Value) -> Result<BTreeSet<OpId>, String> {
    v.as_array()
        .ok_or("prev must be an array")?
        .iter()
        .map(id_from_json)
        .collect()
}

fn parse_prim(v: &Value) -> Result<PrimitiveValue, String> {
    let t = v.get("t").and_then(Value::as_str).ok_or("value is missing \"t\"")?;
    let payload = v.get("v");
    let missing = || format!("{t} value is missing \"v\"");
    Ok(match t {
        "null" => PrimitiveValue::Null,
        "str" => PrimitiveValue::Str(payload.and_then(Value::as_str).ok_or_else(missing)?.to_owned()),
        "int" => PrimitiveValue::Int(payload.and_then(Value::as_i64).ok_or_else(missing)?),
        "bool" => PrimitiveValue::Bool(payload.and_then(Value::as_bool).ok_or_else(missing)?),
        "f64" => PrimitiveValue::F64(match payload {
            Some(Value::Number(n)) => n.as_f64().ok_or_else(missing)?,
            Some(Value::String(s)) => match s.as_str() {
                "NaN" => f64::NAN,
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                _ => return Err(format!("bad f64 {s:?}")),
            },
            _ => return Err(missing()),
        }),
        other => return Err(format!("unknown value tag {other:?}")),
    })
}

fn parse_key(v: &Value) -> Result<Key, String> {
    if v.get("t").and_then(Value::as_str) == Some("id") {
        return Ok(Key::Elem(id_from_json(v.get("v").ok_or("id key is missing \"v\"")?)?));
    }
    Ok(Key::Map(match parse_prim(v)? {
        PrimitiveValue::Str(s) => MapKey::Str(s),
        PrimitiveValue::Int(i) => MapKey::Int(i),
        PrimitiveValue::Bool(b) => MapKey::Bool(b),
        other => return Err(format!("{other:?} cannot be a key")),
    }))
}

/// The canonical bytes of `ops`.
pub fn serialize_log(ops: &OpSet) -> String {
    let mut out = String::from("{\"version\":1,\"ops\":[");
    for (i, (id, op)) in ops.linearize().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        write_record(&mut out, id, op);
    }
    if !ops.is_empty() {
        out.push('\n');
    }
    out.push_str("]}\n");
    out
}

fn write_record(out: &mut String, id: &OpId, op: &Operation) {
    out.push_str("{\"id\":");
    write_id(out, id);
    let _ = write!(out, ",\"action\":{{\"t\":\"{}\"", op.tag());
    match op {
        Operation::MakeMap | Operation::MakeList => {}
        Operation::MakeVal(v) => {
            out.push_str(",\"val\":");
            write_prim(out, v);
        }
        Operation::InsertAfter(r) => {
            out.push_str(",\"ref\":");
            write_id(out, r);
        }
        Operation::Assign {
            obj,
            key,
            val,
            prev,
        } => {
            out.push_str(",\"obj\":");
            write_id(out, obj);
            out.push_str(",\"key\":");
            write_key(out, key);
            out.push_str(",\"val\":");
            write_id(out, val);
            out.push_str(",\"prev\":");
            write_ids(out, prev);
        }
        Operation::Remove { obj, key, prev } => {
            out.push_str(",\"obj\":");
            write_id(out, obj);
            out.push_str(",\"key\":");
            write_key(out, key);
            out.push_str(",\"prev\":");
            write_ids(out, prev);
        }
    }
    out.push_str("}}");
}

fn write_id(out: &mut String, id: &OpId) {
    if id.counter > MAX_SAFE_INTEGER {
        let _ = write!(out, "[\"{}\",", id.counter);
    } else {
        let _ = write!(out, "[{},", id.counter);
    }
    out.push_str(&Value::String(id.node.clone()).to_string());
    out.push(']');
}

fn write_ids(out: &mut String, ids: &BTreeSet<OpId>) {
    out.push('[');
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_id(out, id);
    }
    out.push(']');
}

fn write_prim(out: &mut String, v: &PrimitiveValue) {
    match v {
        PrimitiveValue::Null => out.push_str("{\"t\":\"null\"}"),
        PrimitiveValue::Str(s) => {
            let _ = write!(out, "{{\"t\":\"str\",\"v\":{}}}", Value::String(s.clone()));
        }
        PrimitiveValue::Int(i) => {
            let _ = write!(out, "{{\"t\":\"int\",\"v\":{i}}}");
        }
        PrimitiveValue::Bool(b) => {
            let _ = write!(out, "{{\"t\":\"bool\",\"v\":{b}}}");
        }
        PrimitiveValue::F64(f) => {
            let _ = write!(out, "{{\"t\":\"f64\",\"v\":{}}}", f64_json(*f));
        }
    }
}

fn f64_json(f: f64) -> Value {
    if f.is_nan() {
        Value::from("NaN")
    } else if f.is_infinite() {
        Value::from(if f > 0.0 { "inf" } else { "-inf" })
    } else {
        json!(f)
    }
}

fn write_key(out: &mut String, key: &Key) {
    match key {
        Key::Map(MapKey::Str(s)) => write_prim(out, &PrimitiveValue::Str(s.clone())),
        Key::Map(MapKey::Int(i)) => write_prim(out, &PrimitiveValue::Int(*i)),
        Key::Map(MapKey::Bool(b)) => write_prim(out, &PrimitiveValue::Bool(*b)),
        Key::Elem(id) => {
            out.push_str("{\"t\":\"id\",\"v\":");
            write_id(out, id);
            out.push('}');
        }
    }
}

/// Re-serializes arbitrary log bytes in canonical form.
pub fn canonicalize(bytes: &[u8]) -> Result<String, CodecError> {
    parse_log(bytes).map(|ops| serialize_log(&ops))
}

pub fn id_json(id: &OpId) -> Value {
    if id.counter > MAX_SAFE_INTEGER {
        json!([id.counter.to_string(), id.node])
    } else {
        json!([id.counter, id.node])
    }
}

/// Renders a materialized document as plain JSON.
///
/// Primitives become JSON scalars (non-finite floats become
/// `{"$f64":"NaN"}` and friends); lists become arrays of register slots;
/// maps become objects whose string keys are written verbatim, with integer
/// and boolean keys spelled `#i:5` and `#b:true` and a leading `#` in string
/// keys doubled; a back-edge becomes `{"$ref":[counter,node]}`.
pub fn materialized_json(v: &MaterializedValue) -> Value {
    match v {
        MaterializedValue::Primitive(p) => match p {
            PrimitiveValue::Null => Value::Null,
            PrimitiveValue::Str(s) => Value::from(s.as_str()),
            PrimitiveValue::Int(i) => Value::from(*i),
            PrimitiveValue::Bool(b) => Value::from(*b),
            PrimitiveValue::F64(f) if f.is_finite() => json!(f),
            PrimitiveValue::F64(f) => json!({ "$f64": f64_json(*f) }),
        },
        MaterializedValue::Map(m) => Value::Object(
            m.iter()
                .map(|(k, slot)| (map_key_json(k), slot_json(slot)))
                .collect(),
        ),
        MaterializedValue::List(items) => Value::Array(items.iter().map(|s| slot_json(s)).collect()),
        MaterializedValue::CycleRef(id) => json!({ "$ref": id_json(id) }),
    }
}

fn slot_json(slot: &[MaterializedValue]) -> Value {
    Value::Array(slot.iter().map(materialized_json).collect())
}

fn map_key_json(k: &MapKey) -> String {
    match k {
        MapKey::Str(s) if s.starts_with('#') => format!("#{s}"),
        MapKey::Str(s) => s.clone(),
        MapKey::Int(i) => format!("#i:{i}"),
        MapKey::Bool(b) => format!("#b:{b}"),
    }
}
