//! A replicated-list toolkit: two tree-based merge rules for collaborative
//! text editing, a deterministic causal-broadcast simulator, executable
//! oracles for the ordering guarantees the merge rules claim, and a gallery
//! reproducing the interleaving anomalies of earlier designs.
//!
//! Start with [`engine::Replica`] for the data type itself, [`sim`] for
//! driving multi-replica executions, and [`oracle`] for checking them.

pub mod bench;
pub mod engine;
pub mod gallery;
pub mod id;
pub mod log_text;
pub mod oracle;
pub mod save;
pub mod script_text;
pub mod sim;
pub mod trace;
pub mod tree;
pub mod wire;

pub use engine::{EngineError, OpMessage, ProtocolError, Replica, Variant};
pub use id::{ElementId, IdError, LeftOrigin, Parent, ReplicaId, RightOrigin, Side};
pub use oracle::{ForwardReport, OracleError, Origins, Verdict, Violation};
pub use tree::{NodeView, TraversalEntry, Tree, TreeError};
