//! Trace-replay benchmark: one replica types an editing trace, every
//! operation is wire-encoded, and the final state round-trips through the
//! document codec.
//!
//! The replay is deliberately single-replica and single-threaded: the
//! questions it answers are "how fast does one site process and encode its
//! own edits" and "how big are the artifacts", not anything about merging.
//! Timing covers op generation plus wire encoding; saving, loading, and the
//! oracle comparison are timed (or checked) separately, outside the
//! throughput figure.
//!
//! With `repeat = k` the trace replays k times back to back into the same
//! document, each pass offset by the length the previous passes built — a
//! cheap way to scale a real editing session to millions of operations
//! while keeping its local structure.
//!
//! Every report carries two independent verdicts: the final text must equal
//! a plain string-splice replay of the same trace ([`splice_replay`]'s
//! cousin, run here pass by pass), and the saved document must load back
//! into a replica that saves to the identical bytes.

use std::fmt;
use std::time::{Duration, Instant};

use crate::engine::{Replica, Variant};
use crate::id::ReplicaId;
use crate::save::{load, save};
use crate::trace::{splice_into, EditTrace, TraceOp};
use crate::wire::encode_op;

/// Everything one benchmark run measured.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub variant: Variant,
    /// Number of back-to-back passes over the trace.
    pub repeat: usize,
    pub ops_replayed: usize,
    pub final_visible_len: usize,
    /// Wall-clock time for op generation + wire encoding.
    pub replay: Duration,
    pub ops_per_sec: f64,
    /// Total wire bytes across every encoded op.
    pub wire_bytes: u64,
    pub avg_wire_bytes_per_op: f64,
    pub save_bytes: usize,
    pub save_records: usize,
    pub save_time: Duration,
    pub load_time: Duration,
    /// Whether the loaded replica saves back to the identical bytes.
    pub round_trip_identical: bool,
    /// Whether the engine's final text equals the string-splice replay.
    pub splice_match: bool,
    /// Process high-water memory (KiB) after the run, if the platform
    /// exposes it. An allocator-level figure: useful for spotting blowups,
    /// not comparable across machines, allocators, or other workloads.
    pub peak_memory_kib: Option<u64>,
}

/// Replays `trace` `repeat` times through one replica, encoding every op.
///
/// The trace must be position-valid (both [`crate::trace::ingest_trace`]
/// and [`crate::trace::synthetic_trace`] guarantee that); an invalid trace
/// is a caller bug and panics.
pub fn bench_replay(trace: &EditTrace, variant: Variant, repeat: usize) -> BenchReport {
    let mut replica = Replica::new(
        ReplicaId::new("bench").expect("static name is nonempty"),
        variant,
    );
    let pass_len = trace.final_len();

    let started = Instant::now();
    let mut wire_bytes = 0u64;
    let mut ops_replayed = 0usize;
    for pass in 0..repeat {
        let offset = pass * pass_len;
        for op in &trace.ops {
            let msg = match *op {
                TraceOp::Insert { position, value } => replica
                    .insert(position + offset, value)
                    .expect("trace positions are validated at ingestion"),
                TraceOp::Delete { position } => replica
                    .delete(position + offset)
                    .expect("trace positions are validated at ingestion"),
            };
            wire_bytes += encode_op(&msg).len() as u64;
            ops_replayed += 1;
        }
    }
    let replay = started.elapsed();

    let started = Instant::now();
    let bytes = save(&replica);
    let save_time = started.elapsed();

    let started = Instant::now();
    let loaded = load(&bytes).expect("a fresh save always loads");
    let load_time = started.elapsed();
    // Saves are canonical, so byte equality is full-state equality (ids,
    // values, tombstones, child order, right origins).
    let round_trip_identical = save(&loaded) == bytes;
    drop(loaded);

    let save_records = crate::save::save_stats(&replica).records;

    let mut oracle: Vec<char> = Vec::new();
    for pass in 0..repeat {
        splice_into(&mut oracle, trace, pass * pass_len)
            .expect("trace positions are validated at ingestion");
    }
    let document = replica.document();
    let splice_match = document == oracle.iter().collect::<String>();

    BenchReport {
        variant,
        repeat,
        ops_replayed,
        final_visible_len: document.chars().count(),
        replay,
        ops_per_sec: if ops_replayed == 0 {
            0.0
        } else {
            ops_replayed as f64 / replay.as_secs_f64()
        },
        wire_bytes,
        avg_wire_bytes_per_op: if ops_replayed == 0 {
            0.0
        } else {
            wire_bytes as f64 / ops_replayed as f64
        },
        save_bytes: bytes.len(),
        save_records,
        save_time,
        load_time,
        round_trip_identical,
        splice_match,
        peak_memory_kib: peak_memory_kib(),
    }
}

/// The process's high-water resident set in KiB, where the platform reports
/// one (`VmHWM` on Linux).
fn peak_memory_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// `1234567` -> `"1,234,567"`, for readable report numbers.
fn group_digits(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant                {}", self.variant)?;
        writeln!(f, "passes                 {}", self.repeat)?;
        writeln!(
            f,
            "ops replayed           {}",
            group_digits(self.ops_replayed as u64)
        )?;
        writeln!(
            f,
            "final visible length   {}",
            group_digits(self.final_visible_len as u64)
        )?;
        writeln!(f, "replay time            {:.3} s", self.replay.as_secs_f64())?;
        writeln!(
            f,
            "throughput             {} ops/s",
            group_digits(self.ops_per_sec as u64)
        )?;
        writeln!(
            f,
            "wire bytes             {} total, {:.1} avg/op",
            group_digits(self.wire_bytes),
            self.avg_wire_bytes_per_op
        )?;
        writeln!(
            f,
            "save size              {} bytes ({} records)",
            group_digits(self.save_bytes as u64),
            group_digits(self.save_records as u64)
        )?;
        writeln!(f, "save time              {:.3} s", self.save_time.as_secs_f64())?;
        writeln!(f, "load time              {:.3} s", self.load_time.as_secs_f64())?;
        writeln!(
            f,
            "round trip             {}",
            if self.round_trip_identical {
                "identical"
            } else {
                "MISMATCH"
            }
        )?;
        writeln!(
            f,
            "splice oracle          {}",
            if self.splice_match { "match" } else { "MISMATCH" }
        )?;
        match self.peak_memory_kib {
            Some(kib) => writeln!(
                f,
                "peak memory            {} KiB (high-water mark; not comparable across machines)",
                group_digits(kib)
            ),
            None => writeln!(f, "peak memory            unavailable on this platform"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synthetic_trace;

    #[test]
    fn replay_is_verified_by_both_oracles() {
        let trace = synthetic_trace(5, 3_000, 1_000);
        for variant in [Variant::Fugue, Variant::FugueMax] {
            let report = bench_replay(&trace, variant, 1);
            assert_eq!(report.ops_replayed, 4_000);
            assert_eq!(report.final_visible_len, 2_000);
            assert!(report.splice_match);
            assert!(report.round_trip_identical);
            assert!(report.wire_bytes > 0);
            assert!(report.save_bytes > 16, "a real document outgrows the header");
        }
    }

    #[test]
    fn repeat_scales_the_document_and_offsets_every_pass() {
        let trace = synthetic_trace(9, 600, 200);
        let report = bench_replay(&trace, Variant::Fugue, 3);
        assert_eq!(report.repeat, 3);
        assert_eq!(report.ops_replayed, 2_400);
        assert_eq!(report.final_visible_len, 3 * 400);
        assert!(report.splice_match);
        assert!(report.round_trip_identical);
    }

    #[test]
    fn zero_passes_is_an_empty_report_and_an_empty_document() {
        let trace = synthetic_trace(1, 100, 40);
        let report = bench_replay(&trace, Variant::FugueMax, 0);
        assert_eq!(report.ops_replayed, 0);
        assert_eq!(report.final_visible_len, 0);
        assert_eq!(report.ops_per_sec, 0.0);
        assert_eq!(report.avg_wire_bytes_per_op, 0.0);
        assert!(report.splice_match, "empty equals empty");
        assert!(report.round_trip_identical);
    }

    #[test]
    fn both_engines_and_the_splice_oracle_agree_on_one_text() {
        let trace = synthetic_trace(77, 2_000, 900);
        let fugue = bench_replay(&trace, Variant::Fugue, 1);
        let fuguemax = bench_replay(&trace, Variant::FugueMax, 1);
        // Single-replica editing leaves no concurrency to resolve, so the
        // two merge rules and the splice oracle must produce one text.
        assert!(fugue.splice_match && fuguemax.splice_match);
        assert_eq!(fugue.final_visible_len, fuguemax.final_visible_len);
    }

    #[test]
    fn report_renders_every_line() {
        let trace = synthetic_trace(3, 200, 50);
        let text = bench_replay(&trace, Variant::Fugue, 1).to_string();
        for label in [
            "variant",
            "passes",
            "ops replayed",
            "final visible length",
            "replay time",
            "throughput",
            "wire bytes",
            "save size",
            "save time",
            "load time",
            "round trip             identical",
            "splice oracle          match",
            "peak memory",
        ] {
            assert!(text.contains(label), "missing line: {label}");
        }
    }

    #[test]
    fn digit_grouping_matches_convention() {
        assert_eq!(group_digits(0), "0");
        assert_eq!(group_digits(999), "999");
        assert_eq!(group_digits(1_000), "1,000");
        assert_eq!(group_digits(10_485_200), "10,485,200");
    }
}
