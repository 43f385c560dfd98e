//! Text-editing traces: ingestion, generation, and a string-splice oracle.
//!
//! A trace is an ordered stream of single-character edits against a growing
//! document — the raw material for replay benchmarks. The on-disk format is
//! the automerge-perf JSON layout used by several editor-history datasets:
//! a top-level array whose entries are `[position, delete_count,
//! inserted_string...]`. Positions count Unicode code points.
//!
//! [`ingest_trace`] normalizes that file into single-character operations
//! (a combined entry expands to its deletes, then its inserts) and validates
//! every position against the incrementally built document, so a replayer
//! can trust the stream. [`synthetic_trace`] generates a seeded,
//! reproducible trace with an exact op mix and editor-like tail locality —
//! a stand-in when the real dataset is not vendored. [`splice_replay`] is
//! the independent oracle: it applies the trace to a plain `Vec<char>`,
//! with no tree in sight, and returns the final text.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

/// One single-character edit at a code-point position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOp {
    /// Insert `value` so that it ends up at `position` (0 ≤ position ≤ len).
    Insert { position: usize, value: char },
    /// Delete the character at `position` (0 ≤ position < len).
    Delete { position: usize },
}

/// An ordered, position-validated stream of single-character edits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EditTrace {
    pub ops: Vec<TraceOp>,
}

impl EditTrace {
    /// Number of inserts in the stream.
    pub fn insert_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, TraceOp::Insert { .. }))
            .count()
    }

    /// Number of deletes in the stream.
    pub fn delete_count(&self) -> usize {
        self.ops.len() - self.insert_count()
    }

    /// Final document length after applying every op (inserts − deletes).
    pub fn final_len(&self) -> usize {
        self.insert_count() - self.delete_count()
    }
}

/// Why a trace file was rejected. `index` is the offending entry's position
/// in the top-level JSON array.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trace root must be an array of edit entries")]
    RootNotArray,
    #[error("op {index}: entry must be an array [position, delete_count, chars...]")]
    EntryNotArray { index: usize },
    #[error("op {index}: entry needs at least position and delete count, found {found} elements")]
    TooShort { index: usize, found: usize },
    #[error("op {index}: position must be a non-negative integer")]
    BadPosition { index: usize },
    #[error("op {index}: delete count must be a non-negative integer")]
    BadDeleteCount { index: usize },
    #[error("op {index}: inserted text must be a string of exactly one character")]
    BadInsert { index: usize },
    #[error("op {index}: position {position} is out of bounds for a document of length {len}")]
    PositionOutOfBounds {
        index: usize,
        position: usize,
        len: usize,
    },
}

/// Parses an automerge-perf-layout JSON trace into a validated op stream.
///
/// Each entry `[position, delete_count, chars...]` expands to
/// `delete_count` single-character deletes at `position` followed by one
/// insert per listed character (at `position`, `position + 1`, …). Every
/// op's position is checked against the document length implied by the
/// stream so far; the first invalid entry is reported with its index.
pub fn ingest_trace(json: &str) -> Result<EditTrace, TraceError> {
    let root: Value = serde_json::from_str(json)?;
    let entries = root.as_array().ok_or(TraceError::RootNotArray)?;

    let mut ops = Vec::new();
    let mut len: usize = 0;
    for (index, entry) in entries.iter().enumerate() {
        let parts = entry
            .as_array()
            .ok_or(TraceError::EntryNotArray { index })?;
        if parts.len() < 2 {
            return Err(TraceError::TooShort {
                index,
                found: parts.len(),
            });
        }
        let position = parts[0]
            .as_u64()
            .and_then(|p| usize::try_from(p).ok())
            .ok_or(TraceError::BadPosition { index })?;
        let deletes = parts[1]
            .as_u64()
            .and_then(|d| usize::try_from(d).ok())
            .ok_or(TraceError::BadDeleteCount { index })?;

        for _ in 0..deletes {
            if position >= len {
                return Err(TraceError::PositionOutOfBounds {
                    index,
                    position,
                    len,
                });
            }
            ops.push(TraceOp::Delete { position });
            len -= 1;
        }
        for (k, part) in parts[2..].iter().enumerate() {
            let text = part.as_str().ok_or(TraceError::BadInsert { index })?;
            let mut chars = text.chars();
            let value = chars.next().ok_or(TraceError::BadInsert { index })?;
            if chars.next().is_some() {
                return Err(TraceError::BadInsert { index });
            }
            let position = position + k;
            if position > len {
                return Err(TraceError::PositionOutOfBounds {
                    index,
                    position,
                    len,
                });
            }
            ops.push(TraceOp::Insert { position, value });
            len += 1;
        }
    }
    Ok(EditTrace { ops })
}

/// Renders a trace back to the automerge-perf JSON layout, one entry per
/// op. `ingest_trace(write_trace_json(t))` reproduces `t` exactly.
pub fn write_trace_json(trace: &EditTrace) -> String {
    let entries: Vec<Value> = trace
        .ops
        .iter()
        .map(|op| match *op {
            TraceOp::Insert { position, value } => {
                Value::from(vec![Value::from(position), Value::from(0), Value::from(value.to_string())])
            }
            TraceOp::Delete { position } => Value::from(vec![Value::from(position), Value::from(1)]),
        })
        .collect();
    Value::from(entries).to_string()
}

/// Insert count of the reference editing trace this crate benchmarks
/// against: the keystroke history of typing a large text document.
pub const REFERENCE_TRACE_INSERTS: usize = 182_315;
/// Delete count of the reference editing trace.
pub const REFERENCE_TRACE_DELETES: usize = 77_463;
/// Final document length the reference op mix produces.
pub const REFERENCE_TRACE_FINAL_LEN: usize = REFERENCE_TRACE_INSERTS - REFERENCE_TRACE_DELETES;
/// Seed of the canonical synthetic reference trace. Every documented
/// benchmark figure comes from this trace.
pub const REFERENCE_TRACE_SEED: u64 = 2024;

/// The canonical benchmark trace: the reference op mix under the reference
/// seed. Deterministic; regenerating it always yields identical ops.
pub fn reference_trace() -> EditTrace {
    synthetic_trace(
        REFERENCE_TRACE_SEED,
        REFERENCE_TRACE_INSERTS,
        REFERENCE_TRACE_DELETES,
    )
}

/// How far from the document tail the synthetic generator edits.
const LOCALITY_WINDOW: usize = 32;

/// Generates a seeded trace with exactly `inserts` inserts and `deletes`
/// deletes (requires `inserts >= deletes`), mimicking an editor session:
/// a cursor near the end of the document types in bursts, backspaces in
/// shorter bursts, and occasionally jumps elsewhere in the tail window.
/// Insert characters cycle through printable ASCII. The same seed always
/// yields the same trace.
pub fn synthetic_trace(seed: u64, inserts: usize, deletes: usize) -> EditTrace {
    assert!(
        inserts >= deletes,
        "cannot delete more characters than are ever inserted"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::with_capacity(inserts + deletes);
    let mut len: usize = 0;
    let mut cursor: usize = 0;
    let mut remaining_inserts = inserts;
    let mut remaining_deletes = deletes;

    while remaining_inserts + remaining_deletes > 0 {
        // Deleting from an empty document is impossible; otherwise pick the
        // burst kind in proportion to the remaining budgets so both drain
        // together. When the document is empty, inserts always remain: the
        // stream so far has equal counts, and the insert budget was at
        // least as large.
        let deleting = len > 0
            && rng.gen_range(0..remaining_inserts + remaining_deletes) < remaining_deletes;
        let burst = if deleting {
            rng.gen_range(1..=6).min(remaining_deletes)
        } else {
            rng.gen_range(8..=40).min(remaining_inserts)
        };
        // Sometimes the "user" clicks somewhere else in the tail window.
        if rng.gen_ratio(1, 4) {
            cursor = rng.gen_range(len.saturating_sub(LOCALITY_WINDOW)..=len);
        }
        for _ in 0..burst {
            let window_start = len.saturating_sub(LOCALITY_WINDOW);
            cursor = cursor.clamp(window_start, len);
            if deleting {
                if len == 0 {
                    break;
                }
                // Backspace; from the window edge, resume at the tail.
                if cursor == window_start {
                    cursor = len;
                }
                cursor -= 1;
                ops.push(TraceOp::Delete { position: cursor });
                len -= 1;
                remaining_deletes -= 1;
            } else {
                let value = char::from(b' ' + (ops.len() % 95) as u8);
                ops.push(TraceOp::Insert { position: cursor, value });
                cursor += 1;
                len += 1;
                remaining_inserts -= 1;
            }
        }
    }
    EditTrace { ops }
}

/// The independent replay oracle: applies the trace to a plain vector of
/// characters and returns the final text. No tree, no ids — just splicing.
pub fn splice_replay(trace: &EditTrace) -> Result<String, TraceError> {
    let mut doc: Vec<char> = Vec::new();
    splice_into(&mut doc, trace, 0)?;
    Ok(doc.into_iter().collect())
}

/// Applies `trace` to an existing document with every position shifted by
/// `offset` — the primitive behind repeated replay, where pass `k` of a
/// trace that builds an `L`-character document edits at `k × L + position`.
pub fn splice_into(
    doc: &mut Vec<char>,
    trace: &EditTrace,
    offset: usize,
) -> Result<(), TraceError> {
    for (index, op) in trace.ops.iter().enumerate() {
        match *op {
            TraceOp::Insert { position, value } => {
                let position = position + offset;
                if position > doc.len() {
                    return Err(TraceError::PositionOutOfBounds {
                        index,
                        position,
                        len: doc.len(),
                    });
                }
                doc.insert(position, value);
            }
            TraceOp::Delete { position } => {
                let position = position + offset;
                if position >= doc.len() {
                    return Err(TraceError::PositionOutOfBounds {
                        index,
                        position,
                        len: doc.len(),
                    });
                }
                doc.remove(position);
            }
        }
    }
    Ok(())
}
