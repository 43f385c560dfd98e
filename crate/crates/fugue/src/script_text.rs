//! Line-oriented text format for [`Script`] fixture files.
//!
//! One directive per line; blank lines and `#` comments are ignored (a `#`
//! starts a comment anywhere outside a value token). The first directive
//! must declare the replicas; every later line is one step:
//!
//! ```text
//! # Two replicas race for the same spot.
//! replicas A B
//! insert A 0 a     # replica, visible index, value
//! insert A 1 b
//! insert B 0 x
//! deliver A B 1    # receiver, origin, sequence number
//! sync A B         # bidirectional catch-up
//! delete A 2
//! ```
//!
//! Values are single characters. Whitespace and unprintable values use
//! escapes: `\n` newline, `\t` tab, `\s` space, `\\` backslash, `\#` hash,
//! and `\u{1F600}`-style hex scalars for anything else. [`render_script`]
//! and [`parse_script`] round-trip every script whose replica names are
//! plain tokens (no whitespace, no leading `#`), which the engine does not
//! otherwise require but every fixture in this repository satisfies.

use std::fmt::Write as _;

use thiserror::Error;

use crate::id::ReplicaId;
use crate::sim::{Script, ScriptStep};

/// A malformed script file, with the 1-based line the problem is on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptTextError {
    #[error("line {line}: expected the `replicas` declaration before any step")]
    MissingReplicas { line: usize },
    #[error("line {line}: duplicate `replicas` declaration")]
    DuplicateReplicas { line: usize },
    #[error("line {line}: `replicas` needs at least one name")]
    EmptyReplicas { line: usize },
    #[error("line {line}: replica name {name:?} is declared twice")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: replica name {name:?} is not usable here")]
    BadName { line: usize, name: String },
    #[error("line {line}: unknown directive {word:?}")]
    UnknownDirective { line: usize, word: String },
    #[error("line {line}: `{directive}` takes {expected} argument(s), found {found}")]
    BadArity {
        line: usize,
        directive: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {token:?} is not a number")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: step references undeclared replica {name:?}")]
    UndeclaredReplica { line: usize, name: String },
    #[error("line {line}: {token:?} is not a single-character value token")]
    BadValue { line: usize, token: String },
    #[error("the script declares no steps and no replicas")]
    Empty,
}

/// Renders one character as a value token.
pub(crate) fn escape_value(value: char) -> String {
    match value {
        '\n' => "\\n".to_string(),
        '\t' => "\\t".to_string(),
        ' ' => "\\s".to_string(),
        '\\' => "\\\\".to_string(),
        '#' => "\\#".to_string(),
        c if c.is_control() || c.is_whitespace() => format!("\\u{{{:X}}}", c as u32),
        c => c.to_string(),
    }
}

/// Parses one value token back to a character.
fn unescape_value(token: &str, line: usize) -> Result<char, ScriptTextError> {
    let bad = || ScriptTextError::BadValue {
        line,
        token: token.to_string(),
    };
    let mut chars = token.chars();
    let first = chars.next().ok_or_else(bad)?;
    if first != '\\' {
        return if chars.next().is_none() { Ok(first) } else { Err(bad()) };
    }
    let rest: String = chars.collect();
    match rest.as_str() {
        "n" => Ok('\n'),
        "t" => Ok('\t'),
        "s" => Ok(' '),
        "\\" => Ok('\\'),
        "#" => Ok('#'),
        _ => {
            let hex = rest
                .strip_prefix("u{")
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(bad)?;
            let scalar = u32::from_str_radix(hex, 16).map_err(|_| bad())?;
            char::from_u32(scalar).ok_or_else(bad)
        }
    }
}

/// True when a replica name survives tokenization unchanged.
fn name_is_plain_token(name: &str) -> bool {
    !name.is_empty() && !name.contains(char::is_whitespace) && !name.starts_with('#')
}

/// Renders a script in the fixture format (with a trailing newline).
///
/// # Panics
///
/// Panics if a replica name is not a plain token; fixture files cannot
/// express such names.
pub fn render_script(script: &Script) -> String {
    let mut out = String::from("replicas");
    for replica in &script.replicas {
        assert!(
            name_is_plain_token(replica.as_str()),
            "replica name {:?} cannot appear in a script file",
            replica.as_str()
        );
        let _ = write!(out, " {replica}");
    }
    out.push('\n');
    for step in &script.steps {
        match step {
            ScriptStep::Insert { replica, index, value } => {
                let _ = writeln!(out, "insert {replica} {index} {}", escape_value(*value));
            }
            ScriptStep::Delete { replica, index } => {
                let _ = writeln!(out, "delete {replica} {index}");
            }
            ScriptStep::Deliver { replica, origin, seq } => {
                let _ = writeln!(out, "deliver {replica} {origin} {seq}");
            }
            ScriptStep::Sync { a, b } => {
                let _ = writeln!(out, "sync {a} {b}");
            }
        }
    }
    out
}

/// Parses the fixture format.
pub fn parse_script(text: &str) -> Result<Script, ScriptTextError> {
    let mut replicas: Option<Vec<ReplicaId>> = None;
    let mut steps = Vec::new();

    for (line_index, raw_line) in text.lines().enumerate() {
        let line = line_index + 1;
        // Strip comments, but not inside a value token: a hash directly
        // preceded by a backslash is an escaped value.
        let mut content = raw_line;
        let mut search_from = 0;
        while let Some(at) = content[search_from..].find('#').map(|i| i + search_from) {
            if at > 0 && content.as_bytes()[at - 1] == b'\\' {
                search_from = at + 1;
                continue;
            }
            content = &content[..at];
            break;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&directive, args)) = tokens.split_first() else {
            continue;
        };

        if directive == "replicas" {
            if replicas.is_some() {
                return Err(ScriptTextError::DuplicateReplicas { line });
            }
            if args.is_empty() {
                return Err(ScriptTextError::EmptyReplicas { line });
            }
            let mut declared = Vec::new();
            for &name in args {
                if !name_is_plain_token(name) {
                    return Err(ScriptTextError::BadName { line, name: name.to_string() });
                }
                let id = ReplicaId::new(name).map_err(|_| ScriptTextError::BadName {
                    line,
                    name: name.to_string(),
                })?;
                if declared.contains(&id) {
                    return Err(ScriptTextError::DuplicateName { line, name: name.to_string() });
                }
                declared.push(id);
            }
            replicas = Some(declared);
            continue;
        }

        let declared = replicas
            .as_ref()
            .ok_or(ScriptTextError::MissingReplicas { line })?;
        let lookup = |name: &str| -> Result<ReplicaId, ScriptTextError> {
            declared
                .iter()
                .find(|r| r.as_str() == name)
                .cloned()
                .ok_or_else(|| ScriptTextError::UndeclaredReplica {
                    line,
                    name: name.to_string(),
                })
        };
        let number = |token: &str| -> Result<u64, ScriptTextError> {
            token.parse().map_err(|_| ScriptTextError::BadNumber {
                line,
                token: token.to_string(),
            })
        };
        let arity = |directive: &'static str, expected: usize| -> Result<(), ScriptTextError> {
            if args.len() == expected {
                Ok(())
            } else {
                Err(ScriptTextError::BadArity {
                    line,
                    directive,
                    expected,
                    found: args.len(),
                })
            }
        };

        let step = match directive {
            "insert" => {
                arity("insert", 3)?;
                ScriptStep::Insert {
                    replica: lookup(args[0])?,
                    index: number(args[1])? as usize,
                    value: unescape_value(args[2], line)?,
                }
            }
            "delete" => {
                arity("delete", 2)?;
                ScriptStep::Delete {
                    replica: lookup(args[0])?,
                    index: number(args[1])? as usize,
                }
            }
            "deliver" => {
                arity("deliver", 3)?;
                ScriptStep::Deliver {
                    replica: lookup(args[0])?,
                    origin: lookup(args[1])?,
                    seq: number(args[2])?,
                }
            }
            "sync" => {
                arity("sync", 2)?;
                ScriptStep::Sync {
                    a: lookup(args[0])?,
                    b: lookup(args[1])?,
                }
            }
            other => {
                return Err(ScriptTextError::UnknownDirective {
                    line,
                    word: other.to_string(),
                })
            }
        };
        steps.push(step);
    }

    match replicas {
        Some(replicas) => Ok(Script { replicas, steps }),
        None => Err(ScriptTextError::Empty),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Variant;
    use crate::sim::{run_script, snapshot_text};

    fn rid(name: &str) -> ReplicaId {
        ReplicaId::new(name).unwrap()
    }

    #[test]
    fn parses_a_commented_fixture() {
        let text = "\
# race for index 0
replicas A B   # two peers

insert A 0 a
insert B 0 \\s  # a space
deliver A B 1
sync A B
delete A 0
";
        let script = parse_script(text).unwrap();
        assert_eq!(script.replicas, vec![rid("A"), rid("B")]);
        assert_eq!(script.steps.len(), 5);
        assert_eq!(
            script.steps[1],
            ScriptStep::Insert { replica: rid("B"), index: 0, value: ' ' }
        );
        // The parsed script actually runs.
        let log = run_script(&script, Variant::Fugue).unwrap();
        assert_eq!(log.ops.len(), 3);
    }

    #[test]
    fn value_escapes_round_trip() {
        for value in ['a', ' ', '\n', '\t', '\\', '#', '\u{7}', '\u{1F600}', '√'] {
            let token = escape_value(value);
            assert!(!token.contains(char::is_whitespace), "token {token:?}");
            assert_eq!(unescape_value(&token, 1).unwrap(), value, "token {token:?}");
        }
    }

    #[test]
    fn scripts_round_trip_through_render_and_parse() {
        let script = Script {
            replicas: vec![rid("alice"), rid("bob")],
            steps: vec![
                ScriptStep::Insert { replica: rid("alice"), index: 0, value: '\n' },
                ScriptStep::Insert { replica: rid("alice"), index: 0, value: '#' },
                ScriptStep::Deliver { replica: rid("bob"), origin: rid("alice"), seq: 1 },
                ScriptStep::Delete { replica: rid("bob"), index: 0 },
                ScriptStep::Sync { a: rid("alice"), b: rid("bob") },
            ],
        };
        let text = render_script(&script);
        assert_eq!(parse_script(&text).unwrap(), script);

        // Rendering is canonical: parse(render(s)) renders identically.
        assert_eq!(render_script(&parse_script(&text).unwrap()), text);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_script("insert A 0 a").unwrap_err(),
            ScriptTextError::MissingReplicas { line: 1 }
        );
        assert_eq!(
            parse_script("replicas A\nreplicas B").unwrap_err(),
            ScriptTextError::DuplicateReplicas { line: 2 }
        );
        assert_eq!(
            parse_script("replicas A A").unwrap_err(),
            ScriptTextError::DuplicateName { line: 1, name: "A".into() }
        );
        assert_eq!(
            parse_script("replicas A\n\nwobble A").unwrap_err(),
            ScriptTextError::UnknownDirective { line: 3, word: "wobble".into() }
        );
        assert_eq!(
            parse_script("replicas A\ninsert A 0").unwrap_err(),
            ScriptTextError::BadArity { line: 2, directive: "insert", expected: 3, found: 2 }
        );
        assert_eq!(
            parse_script("replicas A\ninsert B 0 a").unwrap_err(),
            ScriptTextError::UndeclaredReplica { line: 2, name: "B".into() }
        );
        assert_eq!(
            parse_script("replicas A\ninsert A zero a").unwrap_err(),
            ScriptTextError::BadNumber { line: 2, token: "zero".into() }
        );
        assert_eq!(
            parse_script("replicas A\ninsert A 0 ab").unwrap_err(),
            ScriptTextError::BadValue { line: 2, token: "ab".into() }
        );
        assert_eq!(parse_script("# nothing\n").unwrap_err(), ScriptTextError::Empty);
    }

    #[test]
    fn escaped_hash_is_a_value_not_a_comment() {
        let script = parse_script("replicas A\ninsert A 0 \\# # trailing comment\n").unwrap();
        assert_eq!(
            script.steps[0],
            ScriptStep::Insert { replica: rid("A"), index: 0, value: '#' }
        );
        let log = run_script(&script, Variant::FugueMax).unwrap();
        assert_eq!(snapshot_text(log.final_snapshot(&rid("A")).unwrap()), "#");
    }
}
