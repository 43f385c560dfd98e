//! The command-line surface.
//!
//! Seven subcommands over the library: `simulate` runs a script file,
//! `fuzz` runs seeded random executions with oracle checks, `audit` prints
//! the interleaving-anomaly scorecard, `bench` replays an editing trace,
//! `save`/`load` exercise the document codec against real files, and
//! `gen-trace` writes the synthetic keystroke trace.
//!
//! Exit codes: 0 on success, 1 when any oracle or round-trip check fails,
//! 2 for usage and input errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fugue::bench::bench_replay;
use fugue::gallery::{rga_variant_cycle_check, scorecard, ScorecardRow};
use fugue::log_text::{render_finals, render_log};
use fugue::oracle::{
    check_forward_noninterleaving, check_maximal_noninterleaving, check_predicted_order,
    check_strong_list,
};
use fugue::save::{load, save, save_stats};
use fugue::script_text::parse_script;
use fugue::sim::{fuzz_execution, run_script, ExecutionLog, FuzzConfig};
use fugue::trace::{
    ingest_trace, synthetic_trace, write_trace_json, EditTrace, TraceOp, REFERENCE_TRACE_DELETES,
    REFERENCE_TRACE_INSERTS, REFERENCE_TRACE_SEED,
};
use fugue::{Replica, ReplicaId, Variant};

#[derive(Parser)]
#[command(
    name = "fugue",
    version,
    about = "Replicated-list toolkit: Fugue and FugueMax engines, a causal-broadcast \
             simulator, ordering oracles, an anomaly gallery, and codecs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a script file and print each replica's final text
    Simulate(SimulateArgs),
    /// Run seeded random executions, checking convergence and oracles
    Fuzz(FuzzArgs),
    /// Print the interleaving-anomaly scorecard with live reproductions
    Audit,
    /// Replay an editing trace and report throughput and codec metrics
    Bench(BenchArgs),
    /// Replay a trace and write the saved-document binary
    Save(SaveArgs),
    /// Load a saved document, verify a re-save round-trip, and report its shape
    Load(LoadArgs),
    /// Write the synthetic keystroke trace as JSON
    GenTrace(GenTraceArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Script file: line-oriented steps, `#` comments
    script: PathBuf,
    /// Merge rule to run the script under
    #[arg(long, default_value_t = Variant::Fugue)]
    variant: Variant,
    /// Oracles to check the execution log against (comma-separated)
    #[arg(long, value_delimiter = ',')]
    check: Vec<OracleName>,
    /// Print the full canonical execution log instead of just final texts
    #[arg(long)]
    dump_log: bool,
}

#[derive(Args)]
struct FuzzArgs {
    /// First seed; `--count` consecutive seeds run from here
    #[arg(long, env = "FUGUE_SEED", default_value_t = 0)]
    seed: u64,
    /// How many consecutive seeds to run, in parallel across threads
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Replicas per execution
    #[arg(long, default_value_t = 4)]
    replicas: usize,
    /// Local edits per execution, spread across the replicas
    #[arg(long, default_value_t = 50)]
    ops: usize,
    /// Merge rule(s) to fuzz
    #[arg(long, default_value = "both")]
    variant: VariantChoice,
    /// Oracles to run on every log (comma-separated). Default: strong-list,
    /// forward, characterization — plus maximal under fuguemax
    #[arg(long, value_delimiter = ',')]
    check: Vec<OracleName>,
    /// At every delivery, also verify that all ready (hence pairwise
    /// concurrent) messages commute on the receiving replica
    #[arg(long)]
    commutativity: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Trace file: JSON array of [position, delete_count, chars...] entries
    trace: PathBuf,
    /// Back-to-back passes over the trace (later passes append)
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Merge rule to replay under
    #[arg(long, default_value_t = Variant::Fugue)]
    variant: Variant,
}

#[derive(Args)]
struct SaveArgs {
    /// Trace file to replay before saving
    trace: PathBuf,
    /// Where to write the saved-document binary
    #[arg(long)]
    out: PathBuf,
    /// Merge rule to replay under
    #[arg(long, default_value_t = Variant::Fugue)]
    variant: Variant,
}

#[derive(Args)]
struct LoadArgs {
    /// Saved-document binary to load
    file: PathBuf,
}

#[derive(Args)]
struct GenTraceArgs {
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Generator seed
    #[arg(long, env = "FUGUE_SEED", default_value_t = REFERENCE_TRACE_SEED)]
    seed: u64,
    /// Insert count
    #[arg(long, default_value_t = REFERENCE_TRACE_INSERTS)]
    inserts: usize,
    /// Delete count (must not exceed the insert count)
    #[arg(long, default_value_t = REFERENCE_TRACE_DELETES)]
    deletes: usize,
}

/// Which merge rules a fuzz run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantChoice {
    Fugue,
    #[value(name = "fuguemax")]
    FugueMax,
    Both,
}

impl VariantChoice {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Fugue => vec![Variant::Fugue],
            VariantChoice::FugueMax => vec![Variant::FugueMax],
            VariantChoice::Both => vec![Variant::Fugue, Variant::FugueMax],
        }
    }
}

/// The checkable ordering properties, by CLI name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleName {
    /// Convergence, causal plausibility, and prefix stability on every state
    StrongList,
    /// No interleaving of concurrent forward insertion runs (two
    /// independent checkers that must also agree with each other)
    Forward,
    /// No interleaving of any concurrent insertion sets with a common
    /// anchor (FugueMax's full guarantee; plain Fugue can fail it)
    Maximal,
    /// Final order equals the closed-form order characterization
    Characterization,
}

impl OracleName {
    fn label(self) -> &'static str {
        match self {
            OracleName::StrongList => "strong-list",
            OracleName::Forward => "forward",
            OracleName::Maximal => "maximal",
            OracleName::Characterization => "characterization",
        }
    }

    /// Runs the oracle; `Err` carries a printable violation report.
    fn run(self, log: &ExecutionLog) -> Result<(), String> {
        match self {
            OracleName::StrongList => match check_strong_list(log) {
                Ok(v) if v.is_pass() => Ok(()),
                Ok(v) => Err(v.to_string()),
                Err(e) => Err(format!("log rejected: {e}")),
            },
            OracleName::Forward => match check_forward_noninterleaving(log) {
                Ok(r) if r.is_pass() => Ok(()),
                Ok(r) => Err(r.to_string()),
                Err(e) => Err(format!("log rejected: {e}")),
            },
            OracleName::Maximal => match check_maximal_noninterleaving(log) {
                Ok(v) if v.is_pass() => Ok(()),
                Ok(v) => Err(v.to_string()),
                Err(e) => Err(format!("log rejected: {e}")),
            },
            OracleName::Characterization => match check_predicted_order(log) {
                Ok(v) if v.is_pass() => Ok(()),
                Ok(v) => Err(v.to_string()),
                Err(e) => Err(format!("log rejected: {e}")),
            },
        }
    }
}

/// The default oracle set for a variant: everything the variant claims.
fn default_oracles(variant: Variant) -> Vec<OracleName> {
    let mut names = vec![
        OracleName::StrongList,
        OracleName::Forward,
        OracleName::Characterization,
    ];
    if variant == Variant::FugueMax {
        names.push(OracleName::Maximal);
    }
    names
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fuzz(args) => run_fuzz(args),
        Command::Audit => Ok(run_audit()),
        Command::Bench(args) => run_bench(args),
        Command::Save(args) => run_save(args),
        Command::Load(args) => run_load(args),
        Command::GenTrace(args) => run_gen_trace(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_text_file(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_simulate(args: SimulateArgs) -> Result<ExitCode, String> {
    let text = read_text_file(&args.script)?;
    let script =
        parse_script(&text).map_err(|e| format!("{}: {e}", args.script.display()))?;
    let log = run_script(&script, args.variant)
        .map_err(|e| format!("{}: {e}", args.script.display()))?;

    if args.dump_log {
        print!("{}", render_log(&log));
    } else {
        print!("{}", render_finals(&log));
    }

    let mut failed = false;
    for oracle in &args.check {
        match oracle.run(&log) {
            Ok(()) => println!("check {}: pass", oracle.label()),
            Err(report) => {
                failed = true;
                println!("check {}: FAIL\n{report}", oracle.label());
            }
        }
    }
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_fuzz(args: FuzzArgs) -> Result<ExitCode, String> {
    if args.replicas == 0 {
        return Err("--replicas must be at least 1".into());
    }
    if args.count == 0 {
        return Err("--count must be at least 1".into());
    }

    let mut jobs: Vec<(u64, Variant)> = Vec::new();
    for i in 0..args.count {
        for variant in args.variant.variants() {
            jobs.push((args.seed.wrapping_add(i), variant));
        }
    }

    // Independent simulators, so batches parallelize trivially. Each worker
    // pulls the next job off a shared cursor; convergence failures panic
    // inside fuzz_execution with the seed in the message.
    let cursor = Mutex::new(0usize);
    let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = {
                    let mut next = cursor.lock().unwrap();
                    let k = *next;
                    *next += 1;
                    k
                };
                let Some(&(seed, variant)) = jobs.get(job) else {
                    return;
                };
                let outcome = fuzz_one(&args, seed, variant);
                let mut line = format!("seed {seed} {variant}: ");
                match &outcome {
                    Ok(summary) => line.push_str(summary),
                    Err(report) => {
                        let _ = write!(line, "FAIL\n{report}");
                        failures.lock().unwrap().push(format!("seed {seed} {variant}"));
                    }
                }
                println!("{line}");
            });
        }
    });

    let failures = failures.into_inner().unwrap();
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} failing execution(s): {}", failures.len(), failures.join(", "));
        Ok(ExitCode::from(1))
    }
}

/// One fuzz execution plus its oracle checks. `Ok` carries a one-line
/// summary, `Err` a multi-line violation report.
fn fuzz_one(args: &FuzzArgs, seed: u64, variant: Variant) -> Result<String, String> {
    let log = fuzz_execution(FuzzConfig {
        seed,
        replicas: args.replicas,
        ops: args.ops,
        variant,
        check_commutativity: args.commutativity,
    });
    log.validate()
        .map_err(|e| format!("execution log is inconsistent: {e}"))?;

    let oracles = if args.check.is_empty() {
        default_oracles(variant)
    } else {
        args.check.clone()
    };
    let mut summary = String::from("converged");
    for oracle in oracles {
        oracle
            .run(&log)
            .map_err(|report| format!("check {}: FAIL\n{report}", oracle.label()))?;
        let _ = write!(summary, ", {} pass", oracle.label());
    }
    Ok(summary)
}

fn run_audit() -> ExitCode {
    let rows = scorecard();
    let header = ScorecardColumns {
        family: "family",
        algorithm: "algorithm",
        forward: "forward",
        backward_one: "backward (one replica)",
        backward_multi: "backward (multi-replica)",
    };
    let widths = column_widths(&header, &rows);
    println!("{}", header.render(&widths));
    println!("{}", "-".repeat(header.render(&widths).chars().count()));
    for row in &rows {
        let cols = ScorecardColumns::of(row);
        println!("{}", cols.render(&widths));
        println!("    evidence: {}", row.evidence);
    }

    let cycle = rga_variant_cycle_check();
    let relations: Vec<String> = cycle
        .iter()
        .map(|(first, second)| format!("ins_{first} < ins_{second}"))
        .collect();
    println!();
    println!(
        "note: the sibling-set RGA variant is not a row above — its defect is \
         divergence, not interleaving. Its sibling order admits a cycle: {}.",
        relations.join(", ")
    );
    ExitCode::SUCCESS
}

/// The five aligned cells of one audit line.
struct ScorecardColumns {
    family: &'static str,
    algorithm: &'static str,
    forward: &'static str,
    backward_one: &'static str,
    backward_multi: &'static str,
}

impl ScorecardColumns {
    fn of(row: &ScorecardRow) -> Self {
        let mark = |m: fugue::gallery::AnomalyMark| -> &'static str {
            match m {
                fugue::gallery::AnomalyMark::Interleaves => "interleaves",
                fugue::gallery::AnomalyMark::NoExampleFound => "no example found",
                fugue::gallery::AnomalyMark::ProvenNonInterleaving => "proven non-interleaving",
                fugue::gallery::AnomalyMark::ReordersCharacters => "reorders characters",
            }
        };
        ScorecardColumns {
            family: row.family,
            algorithm: row.algorithm,
            forward: mark(row.forward),
            backward_one: mark(row.backward_one_replica),
            backward_multi: mark(row.backward_multi_replica),
        }
    }

    fn cells(&self) -> [&str; 5] {
        [
            self.family,
            self.algorithm,
            self.forward,
            self.backward_one,
            self.backward_multi,
        ]
    }

    fn render(&self, widths: &[usize; 5]) -> String {
        let cells = self.cells();
        let mut out = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:<width$}", width = widths[i]);
        }
        out.trim_end().to_string()
    }
}

fn column_widths(header: &ScorecardColumns, rows: &[ScorecardRow]) -> [usize; 5] {
    let mut widths = header.cells().map(str::len);
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(ScorecardColumns::of(row).cells()) {
            *w = (*w).max(cell.len());
        }
    }
    widths
}

fn run_bench(args: BenchArgs) -> Result<ExitCode, String> {
    let json = read_text_file(&args.trace)?;
    let trace = ingest_trace(&json).map_err(|e| format!("{}: {e}", args.trace.display()))?;
    let report = bench_replay(&trace, args.variant, args.repeat);
    print!("{report}");
    Ok(if report.round_trip_identical && report.splice_match {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Replays a validated trace through one fresh replica.
fn replay_trace(trace: &EditTrace, variant: Variant) -> Replica {
    let mut replica = Replica::new(
        ReplicaId::new("editor").expect("static name is nonempty"),
        variant,
    );
    for op in &trace.ops {
        match *op {
            TraceOp::Insert { position, value } => replica
                .insert(position, value)
                .expect("trace positions are validated at ingestion"),
            TraceOp::Delete { position } => replica
                .delete(position)
                .expect("trace positions are validated at ingestion"),
        };
    }
    replica
}

fn run_save(args: SaveArgs) -> Result<ExitCode, String> {
    let json = read_text_file(&args.trace)?;
    let trace = ingest_trace(&json).map_err(|e| format!("{}: {e}", args.trace.display()))?;
    let replica = replay_trace(&trace, args.variant);
    let bytes = save(&replica);
    fs::write(&args.out, &bytes).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let stats = save_stats(&replica);
    println!(
        "saved {} bytes ({} records) to {}; variant {}, visible length {}",
        bytes.len(),
        stats.records,
        args.out.display(),
        replica.variant(),
        replica.len(),
    );
    Ok(ExitCode::SUCCESS)
}

fn run_load(args: LoadArgs) -> Result<ExitCode, String> {
    let bytes = read_file(&args.file)?;
    let replica = load(&bytes).map_err(|e| format!("{}: {e}", args.file.display()))?;
    let elements = replica.tree().element_count();
    println!(
        "loaded {}: variant {}, replica {}, {} elements ({} visible, {} tombstones)",
        args.file.display(),
        replica.variant(),
        replica.replica_id(),
        elements,
        replica.len(),
        elements - replica.len(),
    );
    // Saves are canonical: re-encoding the loaded state must reproduce the
    // input bytes exactly, or the codec lost information.
    if save(&replica) == bytes {
        println!("round trip: identical");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("round trip: MISMATCH");
        Ok(ExitCode::from(1))
    }
}

fn run_gen_trace(args: GenTraceArgs) -> Result<ExitCode, String> {
    if args.deletes > args.inserts {
        return Err(format!(
            "--deletes ({}) cannot exceed --inserts ({})",
            args.deletes, args.inserts
        ));
    }
    let trace = synthetic_trace(args.seed, args.inserts, args.deletes);
    let json = write_trace_json(&trace);
    match &args.out {
        Some(path) => {
            fs::write(path, &json).map_err(|e| format!("{}: {e}", path.display()))?;
            println!(
                "wrote {} ops ({} inserts, {} deletes, final length {}) to {}",
                trace.ops.len(),
                trace.insert_count(),
                trace.delete_count(),
                trace.final_len(),
                path.display(),
            );
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}
