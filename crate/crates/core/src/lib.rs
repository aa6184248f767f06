//! Replicated data structures specified as a deterministic interpretation of
//! a grow-only set of operations.
//!
//! Replicas exchange operations and merge them by set union; the state a user
//! sees is a pure function of the set. On top of that model this crate
//! provides maps, lists and registers ([`datatypes`]), trees with an atomic
//! move ([`tree`]), operation generation ([`opgen`]), executable list
//! specifications and checkers ([`listspec`], [`rga`]), a fault-injecting
//! network simulator ([`sim`]) and the JSON log format ([`codec`]).
//!
//! ```
//! use opsets::{materialized_json, Editor, OpId, OpSet, Operation, Semantics};
//!
//! let mut base = OpSet::new();
//! base.insert(OpId::root(), Operation::MakeList).unwrap();
//! let root = OpId::root();
//!
//! let alice = Editor::new("alice");
//! let bob = Editor::new("bob");
//! let a = alice.ins_list_index(&base, &root, 0, &"x".into()).unwrap();
//! let b = bob.ins_list_index(&base, &root, 0, &"y".into()).unwrap();
//!
//! let merged = a.merge(&b).unwrap();
//! assert_eq!(merged, b.merge(&a).unwrap());
//! let doc = Semantics::MultiValue.materialize(&merged, &root).unwrap();
//! assert_eq!(materialized_json(&doc).to_string(), r#"[["y"],["x"]]"#);
//! ```

pub mod codec;
pub mod datatypes;
pub mod document;
pub mod gen;
pub mod id;
pub mod listspec;
pub mod op;
pub mod opgen;
pub mod opset;
pub mod rga;
pub mod sim;
pub mod tree;

pub use codec::{materialized_json, parse_log, serialize_log, CodecError};
pub use datatypes::{DocState, MaterializedValue, RegisterMode};
pub use document::Semantics;
pub use id::OpId;
pub use op::{Key, MapKey, Operation, PrimitiveValue};
pub use opgen::{Editor, OpGenError, ValueSpec};
pub use opset::{OpSet, OpSetError};
pub use sim::{check_convergence, run_sim, SimConfig, SimTrace, Workload};
pub use tree::{check_tree_invariants, RootKind, TreeConfig};
