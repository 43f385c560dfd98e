//! Canonical text rendering of an [`ExecutionLog`].
//!
//! The simulator records everything an oracle needs: every generated
//! operation with its causal stamp, every delivery order, and a state
//! snapshot after every delivery. This module renders that record as
//! line-oriented text with `#` section comments, one fact per line.
//!
//! The format is render-only — nothing parses it back. Its two jobs are:
//!
//! * **Determinism checks.** Two runs of the same script must produce
//!   byte-identical renderings; comparing the strings compares the complete
//!   logs, not just final texts.
//! * **Human inspection.** `simulate --dump-log` prints it so a surprising
//!   final state can be traced delivery by delivery.
//!
//! Element values use the same escapes as script files (`\n`, `\t`, `\s`,
//! `\\`, `\#`, `\u{..}`), so a dumped log never contains control characters.

use crate::engine::OpMessage;
use crate::script_text::escape_value;
use crate::sim::{ExecutionLog, Snapshot};
use std::fmt::Write as _;

/// Renders a complete execution log as canonical line-oriented text.
///
/// Sections, in order: header (`variant`, `replicas`), generated ops in
/// generation order, per-replica delivery orders, per-replica snapshots
/// after each delivery, and each replica's final visible text.
pub fn render_log(log: &ExecutionLog) -> String {
    let mut out = String::new();

    let _ = writeln!(out, "variant {}", log.variant);
    let _ = write!(out, "replicas");
    for r in &log.replicas {
        let _ = write!(out, " {r}");
    }
    out.push('\n');

    let _ = writeln!(out, "# ops: {} generated", log.ops.len());
    for op in &log.ops {
        let _ = write!(
            out,
            "op {} {} deps{} ",
            op.stamp.origin, op.stamp.seq, op.stamp.deps
        );
        render_message(&mut out, &op.msg);
        let _ = write!(out, " before ");
        render_state(&mut out, &op.state_before);
        let _ = write!(out, " after ");
        render_state(&mut out, &op.state_after);
        out.push('\n');
    }

    let _ = writeln!(out, "# deliveries: per replica, in delivery order");
    for (i, replica) in log.replicas.iter().enumerate() {
        let _ = write!(out, "deliveries {replica}:");
        for (origin, seq) in &log.deliveries[i] {
            let _ = write!(out, " {origin}:{seq}");
        }
        out.push('\n');
    }

    let _ = writeln!(out, "# states: after each delivery (1-based)");
    for (i, replica) in log.replicas.iter().enumerate() {
        for (k, snapshot) in log.snapshots[i].iter().enumerate() {
            let _ = write!(out, "state {replica} {} ", k + 1);
            render_state(&mut out, snapshot);
            out.push('\n');
        }
    }

    out.push_str(&render_finals(log));
    out
}

/// Just the `final <replica> "<text>"` lines — one per replica, values
/// escaped as in script files. The closing section of [`render_log`], also
/// what `simulate` prints by default.
pub fn render_finals(log: &ExecutionLog) -> String {
    let mut out = String::new();
    for (i, replica) in log.replicas.iter().enumerate() {
        let text: String = log.snapshots[i]
            .last()
            .map(|s| {
                s.iter()
                    .filter(|e| !e.is_deleted)
                    .map(|e| escape_value(e.value))
                    .collect()
            })
            .unwrap_or_default();
        let _ = writeln!(out, "final {replica} \"{text}\"");
    }
    out
}

/// One operation message as a single space-separated clause.
fn render_message(out: &mut String, msg: &OpMessage) {
    match msg {
        OpMessage::Insert {
            id,
            value,
            parent,
            side,
            right_origin,
        } => {
            let _ = write!(
                out,
                "insert {id} {} parent={parent} side={side}",
                escape_value(*value)
            );
            if let Some(origin) = right_origin {
                let _ = write!(out, " origin={origin}");
            }
        }
        OpMessage::Delete { id } => {
            let _ = write!(out, "delete {id}");
        }
    }
}

/// A full state (tombstones included) as `[id=value ...]`, tombstones
/// prefixed with `~`.
fn render_state(out: &mut String, snapshot: &Snapshot) {
    out.push('[');
    for (i, entry) in snapshot.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if entry.is_deleted {
            out.push('~');
        }
        let _ = write!(out, "{}={}", entry.id, escape_value(entry.value));
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Variant;
    use crate::script_text::parse_script;
    use crate::sim::{fuzz_execution, run_script, FuzzConfig};

    const WEDGE: &str = "\
replicas A B
insert A 0 a
insert A 1 b
insert B 0 x
sync A B
";

    #[test]
    fn rendering_is_deterministic_across_runs() {
        let script = parse_script(WEDGE).unwrap();
        let one = render_log(&run_script(&script, Variant::Fugue).unwrap());
        let two = render_log(&run_script(&script, Variant::Fugue).unwrap());
        assert_eq!(one, two);

        let cfg = FuzzConfig {
            seed: 7,
            replicas: 3,
            ops: 20,
            variant: Variant::FugueMax,
            check_commutativity: false,
        };
        let one = render_log(&fuzz_execution(cfg.clone()));
        let two = render_log(&fuzz_execution(cfg));
        assert_eq!(one, two);
    }

    #[test]
    fn every_section_appears_with_expected_lines() {
        let script = parse_script(WEDGE).unwrap();
        let log = run_script(&script, Variant::Fugue).unwrap();
        let text = render_log(&log);

        assert!(text.starts_with("variant fugue\nreplicas A B\n"));
        assert!(text.contains("op A 1 deps{} insert A:0 a parent=root side=R"));
        // Sync delivers B's op to A and A's two ops to B, after the three
        // self-deliveries.
        assert!(text.contains("deliveries A: A:1 A:2 B:1\n"));
        assert!(text.contains("deliveries B: B:1 A:1 A:2\n"));
        // Both replicas converge on "abx": A and B share a final line body.
        assert!(text.contains("final A \"abx\"\n"));
        assert!(text.contains("final B \"abx\"\n"));
        // Full states carry ids; the last state of A lists all three.
        assert!(text.contains("state A 3 [A:0=a A:1=b B:0=x]\n"));
    }

    #[test]
    fn values_are_escaped_and_tombstones_marked() {
        let script = parse_script(
            "replicas A\ninsert A 0 \\n\ninsert A 1 q\ndelete A 0\n",
        )
        .unwrap();
        let log = run_script(&script, Variant::Fugue).unwrap();
        let text = render_log(&log);

        assert!(text.contains("insert A:0 \\n parent=root"));
        assert!(text.contains("delete A:0"));
        assert!(text.contains("[~A:0=\\n A:1=q]"));
        assert!(text.contains("final A \"q\"\n"));
        assert!(!text.contains('\u{0}'));
    }

    #[test]
    fn empty_log_renders_header_and_section_comments_only() {
        let script = parse_script("replicas A B\n").unwrap();
        let log = run_script(&script, Variant::FugueMax).unwrap();
        let text = render_log(&log);

        assert!(text.starts_with("variant fuguemax\nreplicas A B\n"));
        assert!(text.contains("# ops: 0 generated\n"));
        assert!(text.contains("deliveries A:\n"));
        assert!(text.contains("final A \"\"\n"));
        assert!(text.contains("final B \"\"\n"));
    }

    #[test]
    fn fuguemax_right_children_carry_their_origin_annotation() {
        let script = parse_script(WEDGE).unwrap();
        let log = run_script(&script, Variant::FugueMax).unwrap();
        let text = render_log(&log);

        // A:1 is a right child inserted mid-typing: its annotation names the
        // element that followed the insertion point at generation time.
        assert!(text.contains("op A 2 deps{A:1} insert A:1 b parent=A:0 side=R origin=end"));
        // Fugue renders the same op without any origin clause.
        let plain = render_log(&run_script(&script, Variant::Fugue).unwrap());
        assert!(plain.contains("op A 2 deps{A:1} insert A:1 b parent=A:0 side=R before"));
    }
}
