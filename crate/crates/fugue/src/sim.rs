//! Deterministic multi-replica simulator with causal broadcast.
//!
//! The simulator drives any number of [`Replica`]s through an execution —
//! either a hand-written [`Script`] (how the fixture scenarios are encoded)
//! or a seeded random run ([`fuzz_execution`]) — while enforcing the causal
//! delivery contract the engines assume: a message is deliverable at a
//! replica only when all its causal dependencies have been delivered there,
//! and messages from one origin arrive in generation order.
//!
//! Everything is recorded into an [`ExecutionLog`]: each generated op with
//! its [`CausalStamp`] and the generating replica's state before and after,
//! plus every replica's delivery order and the state after each delivery.
//! The logs are what the oracle checkers consume — they deliberately contain
//! enough to re-derive insertion anchors without consulting the engine.
//!
//! For small executions, [`enumerate_delivery_orders`] lists *every* linear
//! extension of the causal partial order and [`replay_order`] replays one on
//! a fresh observer replica; together they give exhaustive convergence
//! checks. [`causally_closed_subsets`] enumerates all causally consistent
//! sub-executions, which is how "all reachable list states" is realized for
//! the ordering oracles.
//!
//! Determinism is a hard contract here: identical scripts or seeds produce
//! identical logs, so every failure reproduces from its seed alone.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{EngineError, OpMessage, Replica, Variant};
use crate::id::ReplicaId;
use crate::tree::TraversalEntry;

/// Per-replica delivered-message counts; the causal-order bookkeeping unit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VectorClock(BTreeMap<ReplicaId, u64>);

impl VectorClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Delivered count for one replica (0 if never seen).
    pub fn get(&self, replica: &ReplicaId) -> u64 {
        self.0.get(replica).copied().unwrap_or(0)
    }

    /// Records one more delivery from `replica`; returns the new count.
    pub fn bump(&mut self, replica: &ReplicaId) -> u64 {
        let slot = self.0.entry(replica.clone()).or_insert(0);
        *slot += 1;
        *slot
    }

    /// Whether `self` is pointwise ≥ `other` — i.e. everything `other` has
    /// seen, `self` has seen too.
    pub fn dominates(&self, other: &Self) -> bool {
        other.0.iter().all(|(r, &n)| self.get(r) >= n)
    }

    /// Non-zero entries in replica-name order.
    pub fn entries(&self) -> impl Iterator<Item = (&ReplicaId, u64)> {
        self.0.iter().map(|(r, &n)| (r, n))
    }
}

impl fmt::Display for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (r, n)) in self.entries().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{r}:{n}")?;
        }
        write!(f, "}}")
    }
}

/// Causal coordinates of one broadcast message: who sent it, its per-origin
/// sequence number (1-based), and the sender's delivered counts at
/// generation time (its causal dependencies).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalStamp {
    pub origin: ReplicaId,
    pub seq: u64,
    pub deps: VectorClock,
}

impl CausalStamp {
    /// Whether this message may be delivered to a replica that has delivered
    /// `clock`: in-order from its origin, with all dependencies present.
    pub fn ready_at(&self, clock: &VectorClock) -> bool {
        clock.get(&self.origin) == self.seq - 1 && clock.dominates(&self.deps)
    }
}

impl fmt::Display for CausalStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.origin, self.seq)
    }
}

/// One replica's full element sequence (traversal order, tombstones
/// included) at some instant.
pub type Snapshot = Vec<TraversalEntry>;

/// The visible text of a snapshot.
pub fn snapshot_text(snapshot: &Snapshot) -> String {
    snapshot
        .iter()
        .filter(|e| !e.is_deleted)
        .map(|e| e.value)
        .collect()
}

/// One generated operation with its causal coordinates and the generating
/// replica's state on either side of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedOp {
    pub stamp: CausalStamp,
    pub msg: OpMessage,
    pub state_before: Snapshot,
    pub state_after: Snapshot,
}

/// Complete record of one execution, sufficient for every oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionLog {
    pub variant: Variant,
    /// Replica ids in declaration order.
    pub replicas: Vec<ReplicaId>,
    /// Every generated op, in generation order.
    pub ops: Vec<LoggedOp>,
    /// Per replica (parallel to `replicas`): delivered stamps in delivery
    /// order. Self-deliveries appear here too.
    pub deliveries: Vec<Vec<(ReplicaId, u64)>>,
    /// Per replica: the state after each delivery, parallel to `deliveries`.
    pub snapshots: Vec<Vec<Snapshot>>,
}

impl ExecutionLog {
    /// The logged op with the given causal coordinates.
    pub fn op(&self, origin: &ReplicaId, seq: u64) -> Option<&LoggedOp> {
        self.ops
            .iter()
            .find(|o| o.stamp.origin == *origin && o.stamp.seq == seq)
    }

    /// A replica's state after its last delivery (empty if it never
    /// delivered anything).
    pub fn final_snapshot(&self, replica: &ReplicaId) -> Option<&Snapshot> {
        let i = self.replicas.iter().position(|r| r == replica)?;
        self.snapshots[i].last()
    }

    /// Internal consistency: every delivery order is a causally valid
    /// at-most-once sequence over the logged ops.
    pub fn validate(&self) -> Result<(), String> {
        for (i, replica) in self.replicas.iter().enumerate() {
            let mut clock = VectorClock::new();
            for (origin, seq) in &self.deliveries[i] {
                let op = self
                    .op(origin, *seq)
                    .ok_or_else(|| format!("{replica} delivered unlogged op {origin}:{seq}"))?;
                if !op.stamp.ready_at(&clock) {
                    return Err(format!(
                        "{replica} delivered {origin}:{seq} before its dependencies"
                    ));
                }
                clock.bump(origin);
            }
            if self.deliveries[i].len() != self.snapshots[i].len() {
                return Err(format!("{replica} has unaligned snapshots"));
            }
        }
        Ok(())
    }
}

/// One step of a scripted execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    /// `replica` types `value` at visible index `index`.
    Insert {
        replica: ReplicaId,
        index: usize,
        value: char,
    },
    /// `replica` deletes the element at visible index `index`.
    Delete { replica: ReplicaId, index: usize },
    /// `replica` delivers the message `origin:seq`.
    Deliver {
        replica: ReplicaId,
        origin: ReplicaId,
        seq: u64,
    },
    /// Bidirectional catch-up: each side delivers everything the other has.
    Sync { a: ReplicaId, b: ReplicaId },
}

/// A deterministic multi-replica scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    /// Declared replicas; declaration order fixes nothing except log layout,
    /// but the *names* fix the id order that breaks concurrency ties.
    pub replicas: Vec<ReplicaId>,
    pub steps: Vec<ScriptStep>,
}

/// Errors from running a script; each names the offending step (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("step {step}: unknown replica {name}")]
    UnknownReplica { step: usize, name: ReplicaId },
    #[error("duplicate replica {name} in declaration")]
    DuplicateReplica { name: ReplicaId },
    #[error("step {step}: no message {origin}:{seq} exists yet")]
    NoSuchMessage {
        step: usize,
        origin: ReplicaId,
        seq: u64,
    },
    #[error("step {step}: delivering {origin}:{seq} to {replica} violates causal order")]
    CausalViolation {
        step: usize,
        replica: ReplicaId,
        origin: ReplicaId,
        seq: u64,
    },
    #[error("step {step}: {source}")]
    Engine {
        step: usize,
        #[source]
        source: EngineError,
    },
}

/// Too many ops for exhaustive delivery-order enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{count} ops exceed the exhaustive-enumeration bound of {max}")]
pub struct TooManyOps {
    pub count: usize,
    pub max: usize,
}

/// Ops are enumerable only up to this count (8! = 40320 orders).
pub const ENUMERATION_MAX_OPS: usize = 8;

/// The simulator proper: replicas plus broadcast bookkeeping.
struct Sim {
    variant: Variant,
    names: Vec<ReplicaId>,
    replicas: Vec<Replica>,
    clocks: Vec<VectorClock>,
    /// Every generated message in generation order.
    pool: Vec<(CausalStamp, OpMessage)>,
    log_ops: Vec<LoggedOp>,
    deliveries: Vec<Vec<(ReplicaId, u64)>>,
    snapshots: Vec<Vec<Snapshot>>,
}

impl Sim {
    fn new(names: Vec<ReplicaId>, variant: Variant) -> Result<Self, ScriptError> {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(ScriptError::DuplicateReplica { name: n.clone() });
            }
        }
        Ok(Sim {
            variant,
            replicas: names
                .iter()
                .map(|n| Replica::new(n.clone(), variant))
                .collect(),
            clocks: vec![VectorClock::new(); names.len()],
            pool: Vec::new(),
            log_ops: Vec::new(),
            deliveries: vec![Vec::new(); names.len()],
            snapshots: vec![Vec::new(); names.len()],
            names,
        })
    }

    fn index_of(&self, name: &ReplicaId) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Runs one local edit on replica `at`, logging and self-delivering it.
    fn generate(
        &mut self,
        at: usize,
        edit: impl FnOnce(&mut Replica) -> Result<OpMessage, EngineError>,
    ) -> Result<(), EngineError> {
        let state_before = self.replicas[at].state();
        let deps = self.clocks[at].clone();
        let msg = edit(&mut self.replicas[at])?;
        let state_after = self.replicas[at].state();
        let seq = self.clocks[at].bump(&self.names[at]);
        let stamp = CausalStamp {
            origin: self.names[at].clone(),
            seq,
            deps,
        };
        self.pool.push((stamp.clone(), msg.clone()));
        self.deliveries[at].push((self.names[at].clone(), seq));
        self.snapshots[at].push(state_after.clone());
        self.log_ops.push(LoggedOp {
            stamp,
            msg,
            state_before,
            state_after,
        });
        Ok(())
    }

    fn find_message(&self, origin: &ReplicaId, seq: u64) -> Option<usize> {
        self.pool
            .iter()
            .position(|(s, _)| s.origin == *origin && s.seq == seq)
    }

    /// Delivers pool message `msg_idx` to replica `at` (must be ready).
    fn deliver(&mut self, at: usize, msg_idx: usize) -> Result<(), EngineError> {
        let (stamp, msg) = self.pool[msg_idx].clone();
        debug_assert!(stamp.ready_at(&self.clocks[at]));
        self.replicas[at].apply(&msg)?;
        self.clocks[at].bump(&stamp.origin);
        self.deliveries[at].push((stamp.origin.clone(), stamp.seq));
        self.snapshots[at].push(self.replicas[at].state());
        Ok(())
    }

    /// Pool indices of messages currently deliverable to `at`, in
    /// generation order.
    fn ready_at(&self, at: usize) -> Vec<usize> {
        self.pool
            .iter()
            .enumerate()
            .filter(|(_, (s, _))| s.ready_at(&self.clocks[at]))
            .map(|(i, _)| i)
            .collect()
    }

    /// One-way catch-up: `to` delivers, in `from`'s delivery order, every
    /// message `from` has delivered that `to` has not. Iterating in the
    /// source's delivery order keeps every intermediate step causally valid.
    fn catch_up(&mut self, to: usize, from: usize) -> Result<(), EngineError> {
        let source_order = self.deliveries[from].clone();
        for (origin, seq) in source_order {
            if self.clocks[to].get(&origin) < seq {
                let idx = self
                    .find_message(&origin, seq)
                    .expect("delivered messages are pooled");
                self.deliver(to, idx)?;
            }
        }
        Ok(())
    }

    /// Full pairwise synchronization: afterwards every replica has delivered
    /// every generated message.
    fn sync_all(&mut self) -> Result<(), EngineError> {
        for i in 1..self.replicas.len() {
            self.catch_up(0, i)?;
        }
        for i in 1..self.replicas.len() {
            self.catch_up(i, 0)?;
        }
        Ok(())
    }

    fn into_log(self) -> ExecutionLog {
        ExecutionLog {
            variant: self.variant,
            replicas: self.names,
            ops: self.log_ops,
            deliveries: self.deliveries,
            snapshots: self.snapshots,
        }
    }
}

/// Runs a script to completion. Identical scripts produce identical logs.
pub fn run_script(script: &Script, variant: Variant) -> Result<ExecutionLog, ScriptError> {
    let mut sim = Sim::new(script.replicas.clone(), variant)?;
    for (step, s) in script.steps.iter().enumerate() {
        let resolve = |name: &ReplicaId| {
            sim.index_of(name).ok_or(ScriptError::UnknownReplica {
                step,
                name: name.clone(),
            })
        };
        match s {
            ScriptStep::Insert {
                replica,
                index,
                value,
            } => {
                let at = resolve(replica)?;
                let (index, value) = (*index, *value);
                sim.generate(at, |r| r.insert(index, value))
                    .map_err(|source| ScriptError::Engine { step, source })?;
            }
            ScriptStep::Delete { replica, index } => {
                let at = resolve(replica)?;
                let index = *index;
                sim.generate(at, |r| r.delete(index))
                    .map_err(|source| ScriptError::Engine { step, source })?;
            }
            ScriptStep::Deliver {
                replica,
                origin,
                seq,
            } => {
                let at = resolve(replica)?;
                resolve(origin)?;
                let idx =
                    sim.find_message(origin, *seq)
                        .ok_or_else(|| ScriptError::NoSuchMessage {
                            step,
                            origin: origin.clone(),
                            seq: *seq,
                        })?;
                if !sim.pool[idx].0.ready_at(&sim.clocks[at]) {
                    return Err(ScriptError::CausalViolation {
                        step,
                        replica: replica.clone(),
                        origin: origin.clone(),
                        seq: *seq,
                    });
                }
                sim.deliver(at, idx)
                    .map_err(|source| ScriptError::Engine { step, source })?;
            }
            ScriptStep::Sync { a, b } => {
                let (ia, ib) = (resolve(a)?, resolve(b)?);
                sim.catch_up(ia, ib)
                    .and_then(|()| sim.catch_up(ib, ia))
                    .map_err(|source| ScriptError::Engine { step, source })?;
            }
        }
    }
    Ok(sim.into_log())
}

/// Configuration for a randomized execution.
#[derive(Debug, Clone, Copy)]
pub struct FuzzConfig {
    pub seed: u64,
    pub replicas: usize,
    pub ops: usize,
    pub variant: Variant,
    /// Additionally verify, at every delivery, that all currently ready
    /// (hence pairwise concurrent) messages commute on this replica.
    pub check_commutativity: bool,
}

/// Seeded random execution: random local edits (roughly one delete per four
/// inserts) interleaved with random causally valid deliveries, ending in
/// full synchronization. Panics if the replicas fail to converge — that is
/// an engine bug, and the seed reproduces it.
pub fn fuzz_execution(cfg: FuzzConfig) -> ExecutionLog {
    assert!(cfg.replicas >= 1, "need at least one replica");
    let names: Vec<ReplicaId> = (0..cfg.replicas)
        .map(|i| ReplicaId::new(fuzz_replica_name(i)).expect("generated names are nonempty"))
        .collect();
    let mut sim = Sim::new(names, cfg.variant).expect("generated names are distinct");
    // A seed-stable generator: the log must reproduce from the seed on any
    // build, so the algorithm is pinned rather than left to rand's default.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for _ in 0..cfg.ops {
        let at = rng.gen_range(0..cfg.replicas);
        let len = sim.replicas[at].len();
        let delete = len > 0 && rng.gen_ratio(1, 4);
        if delete {
            let index = rng.gen_range(0..len);
            sim.generate(at, |r| r.delete(index))
        } else {
            let index = rng.gen_range(0..=len);
            let value = (b'a' + rng.gen_range(0..26u8)) as char;
            sim.generate(at, |r| r.insert(index, value))
        }
        .expect("in-bounds local edits cannot fail");

        // A burst of random deliveries keeps replicas partially in sync and
        // exercises every interleaving shape.
        for _ in 0..rng.gen_range(0..3usize) {
            let to = rng.gen_range(0..cfg.replicas);
            let ready = sim.ready_at(to);
            if ready.is_empty() {
                continue;
            }
            let pick = ready[rng.gen_range(0..ready.len())];
            if cfg.check_commutativity {
                assert_concurrent_deliveries_commute(&sim, to, &ready);
            }
            sim.deliver(to, pick)
                .expect("ready messages satisfy the causal contract");
        }
    }

    sim.sync_all().expect("catch-up deliveries are causally valid");
    for i in 1..cfg.replicas {
        assert!(
            sim.replicas[i].tree() == sim.replicas[0].tree(),
            "replicas diverged after full sync (seed {}, variant {}): {:?} vs {:?}",
            cfg.seed,
            cfg.variant,
            sim.replicas[0].document(),
            sim.replicas[i].document(),
        );
    }
    sim.into_log()
}

/// All messages ready at one replica are pairwise concurrent; applying any
/// two in either order must yield the same tree.
fn assert_concurrent_deliveries_commute(sim: &Sim, at: usize, ready: &[usize]) {
    for (k, &i) in ready.iter().enumerate() {
        for &j in &ready[k + 1..] {
            let mut one = sim.replicas[at].clone();
            one.apply(&sim.pool[i].1).expect("ready");
            one.apply(&sim.pool[j].1).expect("concurrent stays ready");
            let mut two = sim.replicas[at].clone();
            two.apply(&sim.pool[j].1).expect("ready");
            two.apply(&sim.pool[i].1).expect("concurrent stays ready");
            assert!(
                one.tree() == two.tree(),
                "concurrent messages {} and {} do not commute at {}",
                sim.pool[i].0,
                sim.pool[j].0,
                sim.names[at],
            );
        }
    }
}

fn fuzz_replica_name(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("r{i}")
    }
}

/// Every linear extension of the ops' causal partial order, as index
/// sequences into `ops`. Bounded by [`ENUMERATION_MAX_OPS`].
pub fn enumerate_delivery_orders(
    ops: &[(CausalStamp, OpMessage)],
) -> Result<Vec<Vec<usize>>, TooManyOps> {
    if ops.len() > ENUMERATION_MAX_OPS {
        return Err(TooManyOps {
            count: ops.len(),
            max: ENUMERATION_MAX_OPS,
        });
    }
    let mut orders = Vec::new();
    let mut chosen = vec![false; ops.len()];
    let mut prefix = Vec::with_capacity(ops.len());
    let mut clock = VectorClock::new();
    extend_orders(ops, &mut chosen, &mut prefix, &mut clock, &mut orders);
    Ok(orders)
}

fn extend_orders(
    ops: &[(CausalStamp, OpMessage)],
    chosen: &mut Vec<bool>,
    prefix: &mut Vec<usize>,
    clock: &mut VectorClock,
    out: &mut Vec<Vec<usize>>,
) {
    if prefix.len() == ops.len() {
        out.push(prefix.clone());
        return;
    }
    for i in 0..ops.len() {
        if chosen[i] || !ops[i].0.ready_at(clock) {
            continue;
        }
        chosen[i] = true;
        prefix.push(i);
        let mut next = clock.clone();
        next.bump(&ops[i].0.origin);
        extend_orders(ops, chosen, prefix, &mut next, out);
        prefix.pop();
        chosen[i] = false;
    }
}

/// Replays ops in the given order on a fresh observer replica and returns
/// it. The order must be a linear extension of the causal order.
pub fn replay_order(
    ops: &[(CausalStamp, OpMessage)],
    order: &[usize],
    variant: Variant,
) -> Result<Replica, EngineError> {
    let observer = ReplicaId::new("observer").expect("nonempty");
    let mut replica = Replica::new(observer, variant);
    for &i in order {
        replica.apply(&ops[i].1)?;
    }
    Ok(replica)
}

/// All causally closed subsets of `ops` (sets containing every causal
/// predecessor of each member), as sorted index lists. These are exactly the
/// op sets some replica could have delivered at some instant — i.e. the
/// reachable list states. Bounded by [`ENUMERATION_MAX_OPS`].
pub fn causally_closed_subsets(
    ops: &[(CausalStamp, OpMessage)],
) -> Result<Vec<Vec<usize>>, TooManyOps> {
    if ops.len() > ENUMERATION_MAX_OPS {
        return Err(TooManyOps {
            count: ops.len(),
            max: ENUMERATION_MAX_OPS,
        });
    }
    // j precedes i when j is from i's origin with a lower seq, or i's deps
    // cover j's coordinates.
    let precedes = |j: usize, i: usize| {
        let (sj, si) = (&ops[j].0, &ops[i].0);
        if sj.origin == si.origin {
            sj.seq < si.seq
        } else {
            si.deps.get(&sj.origin) >= sj.seq
        }
    };
    let n = ops.len();
    let mut subsets = Vec::new();
    'mask: for mask in 0u32..(1 << n) {
        for i in 0..n {
            if mask & (1 << i) == 0 {
                continue;
            }
            for j in 0..n {
                if j != i && mask & (1 << j) == 0 && precedes(j, i) {
                    continue 'mask;
                }
            }
        }
        subsets.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
    }
    Ok(subsets)
}

/// Replays a causally closed subset (in any one valid order) and returns the
/// observer's state. Used to materialize each reachable list state.
pub fn replay_subset(
    ops: &[(CausalStamp, OpMessage)],
    subset: &[usize],
    variant: Variant,
) -> Result<Snapshot, EngineError> {
    // Greedily deliver ready members until done; closure guarantees progress.
    let observer = ReplicaId::new("observer").expect("nonempty");
    let mut replica = Replica::new(observer, variant);
    let mut clock = VectorClock::new();
    let mut remaining: Vec<usize> = subset.to_vec();
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .position(|&i| ops[i].0.ready_at(&clock))
            .expect("causally closed subsets always have a ready member");
        let i = remaining.remove(pos);
        replica.apply(&ops[i].1)?;
        clock.bump(&ops[i].0.origin);
    }
    Ok(replica.state())
}
