//! Executable correctness checks over execution logs.
//!
//! Each checker consumes an [`ExecutionLog`] and returns a structured
//! [`Verdict`] instead of panicking, so harnesses can assert success on
//! healthy logs *and* assert detection on deliberately corrupted ones.
//!
//! The checked properties, in plain terms:
//!
//! * **Shared order** ([`check_strong_list`]): there is one total order over
//!   all inserted elements such that every state any replica ever observed
//!   is a contiguous projection of it, and every insert lands strictly
//!   between the elements that were visibly adjacent to it when it was
//!   generated.
//! * **Forward non-interleaving** ([`check_forward_noninterleaving`]): text
//!   typed left-to-right stays together. Formally, in every reachable state,
//!   the earliest present element anchored to (inserted directly after) a
//!   given element sits immediately after that anchor. Two independent
//!   checkers verify this and are cross-compared.
//! * **Maximal non-interleaving** ([`check_maximal_noninterleaving`]): in
//!   addition to the forward rule, text typed right-to-left stays together
//!   whenever that is compatible with the forward rule, and concurrent
//!   inserts into the exact same gap fall back to id order.
//! * **Order prediction** ([`check_predicted_order`]): the converged list
//!   order is recomputed from nothing but each element's recorded origins
//!   and compared against the engine's order, element for element.
//! * **Concurrent-set separation** ([`find_interleaved_concurrent_sets`]):
//!   a search for two sets of mutually concurrent, same-location inserts
//!   that no total order could keep apart. Its success on tiny executions
//!   demonstrates why "all concurrent runs stay contiguous" is not a
//!   satisfiable requirement and why the forward/maximal properties above
//!   are stated the way they are.
//!
//! Origins are never trusted from the messages alone: [`extract_origins`]
//! re-derives every element's left and right origin from the generating
//! replica's recorded pre-insert state and cross-checks any annotation the
//! message carries.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::engine::{EngineError, OpMessage, Variant};
use crate::id::{ElementId, LeftOrigin, ReplicaId, RightOrigin};
use crate::sim::{
    causally_closed_subsets, replay_order, replay_subset, CausalStamp, ExecutionLog, LoggedOp,
    Snapshot, ENUMERATION_MAX_OPS,
};
use crate::tree::TraversalEntry;

/// A log that cannot be checked at all: it is internally inconsistent or too
/// large for an exhaustive search. Distinct from a [`Violation`], which is a
/// well-formed log failing a property.
#[derive(Debug, Error)]
pub enum OracleError {
    /// Replaying the logged ops on a fresh replica failed; the log does not
    /// describe a causally valid execution.
    #[error("log replay failed: {0}")]
    Replay(#[from] EngineError),
    /// An insert's recorded post-state is not its pre-state with exactly the
    /// new element spliced in.
    #[error("op {origin}:{seq}: post-state is not the pre-state with {id} spliced in")]
    StateSpliceMismatch {
        origin: ReplicaId,
        seq: u64,
        id: ElementId,
    },
    /// An insert message carries a right-origin annotation that disagrees
    /// with the origin derived from the recorded pre-state.
    #[error(
        "op {origin}:{seq}: carried right origin {annotated} disagrees with \
         the derived right origin {derived}"
    )]
    OriginAnnotationMismatch {
        origin: ReplicaId,
        seq: u64,
        annotated: RightOrigin,
        derived: RightOrigin,
    },
    /// A delivery references an op that was never generated.
    #[error("delivery references unknown op {origin}:{seq}")]
    UnknownOp { origin: ReplicaId, seq: u64 },
    /// A replica's snapshot list is not parallel to its delivery list.
    #[error("replica {replica}: snapshots are not aligned with deliveries")]
    MisalignedLog { replica: ReplicaId },
    /// An element id appears where the log records no insert for it.
    #[error("element {id} has no recorded insert")]
    UnknownElement { id: ElementId },
    /// The element sets handed to a set-pair check are unusable.
    #[error("invalid element-set pair: {reason}")]
    InvalidSetPair { reason: &'static str },
    /// Too many inserts for the exhaustive set-pair search.
    #[error("{inserts} inserts exceed the set-pair search bound of {max}")]
    SearchSpaceTooLarge { inserts: usize, max: usize },
}

/// One concrete breach of a checked property, with enough context to
/// reproduce it by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A recorded state is not the shared order restricted to the ops that
    /// replica had delivered.
    StateOrderMismatch {
        replica: ReplicaId,
        /// 0-based index into the replica's delivery sequence.
        delivery: usize,
        expected: String,
        actual: String,
    },
    /// An insert does not fall strictly between the elements that were
    /// visibly adjacent to it at generation time.
    InsertNeighborViolation {
        element: ElementId,
        left: Option<ElementId>,
        right: Option<ElementId>,
    },
    /// The earliest present element anchored to `anchor` is not immediately
    /// after it.
    ForwardAdjacency {
        anchor: LeftOrigin,
        follower: ElementId,
        state: String,
    },
    /// The state is not a stack-disciplined traversal of the insertion
    /// ancestry: `element` appears while its anchor is not the innermost
    /// open run.
    ForwardTraversal {
        element: ElementId,
        anchor: ElementId,
        state: String,
    },
    /// The latest present element anchored in front of `anchor` is not
    /// immediately before it, and no bystander excuses the gap.
    BackwardAdjacency {
        element: ElementId,
        anchor: ElementId,
        state: String,
    },
    /// A bystander that legitimately splits `element` from its right-hand
    /// `anchor` sits on the wrong side of `element`.
    BackwardBystander {
        element: ElementId,
        anchor: ElementId,
        bystander: ElementId,
        state: String,
    },
    /// Two elements inserted concurrently into the exact same gap appear in
    /// descending id order.
    ConcurrentIdOrder {
        before: ElementId,
        after: ElementId,
        state: String,
    },
    /// The order recomputed from origins alone disagrees with the engine.
    PredictedOrderMismatch { predicted: String, actual: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StateOrderMismatch {
                replica,
                delivery,
                expected,
                actual,
            } => write!(
                f,
                "replica {replica} after delivery {delivery}: state `{actual}` \
                 disagrees with the shared-order projection `{expected}`"
            ),
            Violation::InsertNeighborViolation {
                element,
                left,
                right,
            } => {
                let left = left
                    .as_ref()
                    .map_or_else(|| "the list start".to_string(), |id| id.to_string());
                let right = right
                    .as_ref()
                    .map_or_else(|| "the list end".to_string(), |id| id.to_string());
                write!(
                    f,
                    "insert {element} does not fall between its generation-time \
                     neighbors {left} and {right} in the shared order"
                )
            }
            Violation::ForwardAdjacency {
                anchor,
                follower,
                state,
            } => write!(
                f,
                "earliest continuation {follower} of {anchor} is not adjacent \
                 to it in state `{state}`"
            ),
            Violation::ForwardTraversal {
                element,
                anchor,
                state,
            } => write!(
                f,
                "{element} continues {anchor}, but that run is no longer open \
                 at its position in state `{state}`"
            ),
            Violation::BackwardAdjacency {
                element,
                anchor,
                state,
            } => write!(
                f,
                "{element} is the last element anchored in front of {anchor} \
                 but is not adjacent to it in state `{state}`"
            ),
            Violation::BackwardBystander {
                element,
                anchor,
                bystander,
                state,
            } => write!(
                f,
                "bystander {bystander} splits {element} from {anchor} on the \
                 wrong side in state `{state}`"
            ),
            Violation::ConcurrentIdOrder {
                before,
                after,
                state,
            } => write!(
                f,
                "{before} precedes {after} in state `{state}` although both \
                 share their origins and {after} has the lower id"
            ),
            Violation::PredictedOrderMismatch { predicted, actual } => write!(
                f,
                "origin-predicted order `{predicted}` disagrees with the \
                 engine order `{actual}`"
            ),
        }
    }
}

/// The outcome of one property check: pass, or a list of concrete breaches.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            return write!(f, "pass");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

/// Joint result of the two independent forward checkers. They verify the
/// same property through different means, so on any log their per-state
/// verdicts must agree; a non-empty `disagreements` list means one of the
/// checkers is wrong.
#[derive(Debug, Clone, Default)]
pub struct ForwardReport {
    /// Earliest-continuation adjacency, checked pairwise.
    pub adjacency: Verdict,
    /// Stack-disciplined traversal of the insertion ancestry.
    pub traversal: Verdict,
    /// States (rendered) on which the two checkers returned different
    /// verdicts.
    pub disagreements: Vec<String>,
}

impl ForwardReport {
    pub fn is_pass(&self) -> bool {
        self.adjacency.is_pass() && self.traversal.is_pass() && self.disagreements.is_empty()
    }
}

impl fmt::Display for ForwardReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "adjacency: {}\ntraversal: {}", self.adjacency, self.traversal)?;
        if !self.disagreements.is_empty() {
            write!(
                f,
                "\ncheckers disagree on {} state(s), e.g. `{}`",
                self.disagreements.len(),
                self.disagreements[0]
            )?;
        }
        Ok(())
    }
}

/// Every element's insertion anchors, re-derived from the generating
/// replica's recorded pre-insert states.
///
/// The *left origin* of an element is the element visibly directly before
/// its insertion point (or the list start); the *right origin* is the left
/// origin's successor in the generating replica's full element sequence,
/// tombstones included (or the list end). Both are fixed at generation time
/// and never change.
#[derive(Debug, Clone, Default)]
pub struct Origins {
    left: HashMap<ElementId, LeftOrigin>,
    right: HashMap<ElementId, RightOrigin>,
}

impl Origins {
    /// The element's left origin, if the log inserted it.
    pub fn left_of(&self, id: &ElementId) -> Option<&LeftOrigin> {
        self.left.get(id)
    }

    /// The element's right origin, if the log inserted it.
    pub fn right_of(&self, id: &ElementId) -> Option<&RightOrigin> {
        self.right.get(id)
    }

    /// All elements whose left origin is `anchor`, in id order.
    pub fn left_children(&self, anchor: &LeftOrigin) -> Vec<ElementId> {
        let mut ids: Vec<ElementId> = self
            .left
            .iter()
            .filter(|(_, lo)| *lo == anchor)
            .map(|(id, _)| id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// All elements whose right origin is `anchor`, in id order.
    pub fn right_cohort(&self, anchor: &RightOrigin) -> Vec<ElementId> {
        let mut ids: Vec<ElementId> = self
            .right
            .iter()
            .filter(|(_, ro)| *ro == anchor)
            .map(|(id, _)| id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// Whether `elem` sits below `ancestor` in the left-origin ancestry
    /// (following left origins upward). Every element descends from the list
    /// start.
    pub fn is_left_descendant(&self, elem: &ElementId, ancestor: &LeftOrigin) -> bool {
        let mut cur = elem;
        loop {
            match self.left.get(cur) {
                // Unknown lineage: not provably a descendant.
                None => return false,
                Some(LeftOrigin::Start) => return *ancestor == LeftOrigin::Start,
                Some(LeftOrigin::Element(p)) => {
                    if matches!(ancestor, LeftOrigin::Element(a) if a == p) {
                        return true;
                    }
                    cur = p;
                }
            }
        }
    }
}

/// The position in `after` where `id` was spliced into `before`, verifying
/// that everything else is untouched.
fn splice_index(before: &Snapshot, after: &Snapshot, id: &ElementId) -> Option<usize> {
    if after.len() != before.len() + 1 {
        return None;
    }
    let p = (0..before.len())
        .find(|&k| after[k].id != before[k].id)
        .unwrap_or(before.len());
    if after[p].id != *id || after[p].is_deleted {
        return None;
    }
    for k in 0..before.len() {
        let shifted = if k < p { k } else { k + 1 };
        if after[shifted] != before[k] {
            return None;
        }
    }
    Some(p)
}

/// Where an insert landed: its index in the full (tombstone-inclusive)
/// post-state and its visible index at generation time.
fn insertion_point(op: &LoggedOp, id: &ElementId) -> Result<(usize, usize), OracleError> {
    let p = splice_index(&op.state_before, &op.state_after, id).ok_or_else(|| {
        OracleError::StateSpliceMismatch {
            origin: op.stamp.origin.clone(),
            seq: op.stamp.seq,
            id: id.clone(),
        }
    })?;
    let visible = op.state_before[..p].iter().filter(|e| !e.is_deleted).count();
    Ok((p, visible))
}

/// Re-derives every inserted element's origins from the recorded pre-insert
/// states and cross-checks any right-origin annotation the messages carry.
pub fn extract_origins(log: &ExecutionLog) -> Result<Origins, OracleError> {
    let mut origins = Origins::default();
    for op in &log.ops {
        let OpMessage::Insert {
            id, right_origin, ..
        } = &op.msg
        else {
            continue;
        };
        let (_, visible) = insertion_point(op, id)?;
        let before = &op.state_before;
        let left = if visible == 0 {
            LeftOrigin::Start
        } else {
            let anchor = before
                .iter()
                .filter(|e| !e.is_deleted)
                .nth(visible - 1)
                .expect("visible index was counted from this state");
            LeftOrigin::Element(anchor.id.clone())
        };
        let right = match &left {
            LeftOrigin::Start => before
                .first()
                .map(|e| RightOrigin::Element(e.id.clone()))
                .unwrap_or(RightOrigin::End),
            LeftOrigin::Element(a) => {
                let q = before
                    .iter()
                    .position(|e| e.id == *a)
                    .expect("left origin was found in this state");
                before
                    .get(q + 1)
                    .map(|e| RightOrigin::Element(e.id.clone()))
                    .unwrap_or(RightOrigin::End)
            }
        };
        if let Some(annotated) = right_origin {
            if *annotated != right {
                return Err(OracleError::OriginAnnotationMismatch {
                    origin: op.stamp.origin.clone(),
                    seq: op.stamp.seq,
                    annotated: annotated.clone(),
                    derived: right,
                });
            }
        }
        origins.left.insert(id.clone(), left);
        origins.right.insert(id.clone(), right);
    }
    Ok(origins)
}

/// Renders a full element sequence as its values, tombstones bracketed.
fn render_state(state: &[TraversalEntry]) -> String {
    if state.is_empty() {
        return "(empty)".to_string();
    }
    state
        .iter()
        .map(|e| {
            if e.is_deleted {
                format!("[{}]", e.value)
            } else {
                e.value.to_string()
            }
        })
        .collect()
}

fn render_ids(ids: &[ElementId]) -> String {
    ids.iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn op_pairs(log: &ExecutionLog) -> Vec<(CausalStamp, OpMessage)> {
    log.ops
        .iter()
        .map(|o| (o.stamp.clone(), o.msg.clone()))
        .collect()
}

/// The one total order every state must project onto: the full element
/// sequence of a fresh replica that replays all ops in generation order
/// (generation order is always a valid delivery order).
struct SharedOrder {
    entries: Vec<ElementId>,
    position: HashMap<ElementId, usize>,
    value: HashMap<ElementId, char>,
}

fn shared_order(log: &ExecutionLog) -> Result<SharedOrder, OracleError> {
    let pairs = op_pairs(log);
    let order: Vec<usize> = (0..pairs.len()).collect();
    let replica = replay_order(&pairs, &order, log.variant)?;
    let entries: Vec<ElementId> = replica.state().into_iter().map(|e| e.id).collect();
    let position = entries
        .iter()
        .enumerate()
        .map(|(k, id)| (id.clone(), k))
        .collect();
    let value = log
        .ops
        .iter()
        .filter_map(|o| match &o.msg {
            OpMessage::Insert { id, value, .. } => Some((id.clone(), *value)),
            OpMessage::Delete { .. } => None,
        })
        .collect();
    Ok(SharedOrder {
        entries,
        position,
        value,
    })
}

/// Checks that the whole log is explained by one shared total order:
///
/// * after each delivery, a replica's recorded state must equal the shared
///   order restricted to the inserts it has delivered, with exactly the
///   delivered deletes tombstoned;
/// * every insert must land strictly between the elements that were visibly
///   adjacent to its insertion point on the generating replica.
pub fn check_strong_list(log: &ExecutionLog) -> Result<Verdict, OracleError> {
    let shared = shared_order(log)?;
    let mut violations = Vec::new();

    let by_coord: HashMap<(&ReplicaId, u64), &LoggedOp> = log
        .ops
        .iter()
        .map(|o| ((&o.stamp.origin, o.stamp.seq), o))
        .collect();

    for (r, replica) in log.replicas.iter().enumerate() {
        let mut inserted: HashSet<&ElementId> = HashSet::new();
        let mut deleted: HashSet<&ElementId> = HashSet::new();
        for (k, (origin, seq)) in log.deliveries[r].iter().enumerate() {
            let op = by_coord
                .get(&(origin, *seq))
                .ok_or_else(|| OracleError::UnknownOp {
                    origin: origin.clone(),
                    seq: *seq,
                })?;
            match &op.msg {
                OpMessage::Insert { id, .. } => inserted.insert(id),
                OpMessage::Delete { id } => deleted.insert(id),
            };
            let expected: Vec<TraversalEntry> = shared
                .entries
                .iter()
                .filter(|id| inserted.contains(*id))
                .map(|id| TraversalEntry {
                    id: id.clone(),
                    value: shared.value[id],
                    is_deleted: deleted.contains(id),
                })
                .collect();
            let actual =
                log.snapshots[r]
                    .get(k)
                    .ok_or_else(|| OracleError::MisalignedLog {
                        replica: replica.clone(),
                    })?;
            if *actual != expected {
                violations.push(Violation::StateOrderMismatch {
                    replica: replica.clone(),
                    delivery: k,
                    expected: render_state(&expected),
                    actual: render_state(actual),
                });
            }
        }
    }

    for op in &log.ops {
        let OpMessage::Insert { id, .. } = &op.msg else {
            continue;
        };
        let (_, visible) = insertion_point(op, id)?;
        let visibles: Vec<&TraversalEntry> =
            op.state_before.iter().filter(|e| !e.is_deleted).collect();
        let left = visible.checked_sub(1).map(|i| visibles[i].id.clone());
        let right = visibles.get(visible).map(|e| e.id.clone());
        let pe = *shared
            .position
            .get(id)
            .ok_or_else(|| OracleError::UnknownElement { id: id.clone() })?;
        let left_ok = left.as_ref().map_or(true, |l| {
            shared.position.get(l).is_some_and(|pl| *pl < pe)
        });
        let right_ok = right.as_ref().map_or(true, |r| {
            shared.position.get(r).is_some_and(|pr| pe < *pr)
        });
        if !left_ok || !right_ok {
            violations.push(Violation::InsertNeighborViolation {
                element: id.clone(),
                left,
                right,
            });
        }
    }

    Ok(Verdict { violations })
}

/// Every distinct list state the log reaches or implies: each recorded
/// snapshot, each op's pre/post state, the fully converged state, and — for
/// executions small enough to enumerate — the state of every causally
/// closed subset of ops.
fn reachable_states(log: &ExecutionLog) -> Result<Vec<Snapshot>, OracleError> {
    let mut seen: HashSet<Vec<ElementId>> = HashSet::new();
    let mut states: Vec<Snapshot> = Vec::new();
    let mut push = |s: Snapshot| {
        let key: Vec<ElementId> = s.iter().map(|e| e.id.clone()).collect();
        if seen.insert(key) {
            states.push(s);
        }
    };

    for per_replica in &log.snapshots {
        for s in per_replica {
            push(s.clone());
        }
    }
    for op in &log.ops {
        push(op.state_before.clone());
        push(op.state_after.clone());
    }

    let pairs = op_pairs(log);
    let order: Vec<usize> = (0..pairs.len()).collect();
    push(replay_order(&pairs, &order, log.variant)?.state());

    if pairs.len() <= ENUMERATION_MAX_OPS {
        let subsets =
            causally_closed_subsets(&pairs).expect("subset enumeration is bounded above");
        for subset in subsets {
            push(replay_subset(&pairs, &subset, log.variant)?);
        }
    }
    Ok(states)
}

/// One state's element sequence with fast position lookup.
struct StateView<'a> {
    entries: &'a [TraversalEntry],
    pos: HashMap<&'a ElementId, usize>,
    text: String,
}

impl<'a> StateView<'a> {
    fn new(entries: &'a [TraversalEntry]) -> Self {
        let pos = entries.iter().enumerate().map(|(k, e)| (&e.id, k)).collect();
        StateView {
            entries,
            pos,
            text: render_state(entries),
        }
    }
}

/// Forward rule, checked directly: for each anchor, the earliest present
/// element anchored to it must sit immediately after it (or at the front of
/// the list for the start anchor).
fn adjacency_violations(
    view: &StateView<'_>,
    origins: &Origins,
) -> Result<Vec<Violation>, OracleError> {
    let mut earliest: HashMap<&LeftOrigin, (usize, &ElementId)> = HashMap::new();
    for (k, e) in view.entries.iter().enumerate() {
        let anchor = origins
            .left_of(&e.id)
            .ok_or_else(|| OracleError::UnknownElement { id: e.id.clone() })?;
        earliest.entry(anchor).or_insert((k, &e.id));
    }
    let mut items: Vec<(&LeftOrigin, (usize, &ElementId))> = earliest.into_iter().collect();
    items.sort_by_key(|(_, (k, _))| *k);

    let mut violations = Vec::new();
    for (anchor, (k, follower)) in items {
        let expected = match anchor {
            LeftOrigin::Start => Some(0),
            LeftOrigin::Element(a) => view.pos.get(a).map(|p| p + 1),
        };
        if expected != Some(k) {
            violations.push(Violation::ForwardAdjacency {
                anchor: anchor.clone(),
                follower: follower.clone(),
                state: view.text.clone(),
            });
        }
    }
    Ok(violations)
}

/// Forward rule, checked through stack discipline: scanning the state left
/// to right opens a run per element; an element may only appear while its
/// anchor's run is the innermost open one. Equivalent to the adjacency
/// check, verified independently.
fn traversal_violations(
    view: &StateView<'_>,
    origins: &Origins,
) -> Result<Vec<Violation>, OracleError> {
    let mut violations = Vec::new();
    let mut stack: Vec<&ElementId> = Vec::new();
    for e in view.entries {
        let anchor = origins
            .left_of(&e.id)
            .ok_or_else(|| OracleError::UnknownElement { id: e.id.clone() })?;
        match anchor {
            LeftOrigin::Start => stack.clear(),
            LeftOrigin::Element(a) => {
                while stack.last().is_some_and(|top| *top != a) {
                    stack.pop();
                }
                if stack.is_empty() {
                    violations.push(Violation::ForwardTraversal {
                        element: e.id.clone(),
                        anchor: a.clone(),
                        state: view.text.clone(),
                    });
                }
            }
        }
        stack.push(&e.id);
    }
    Ok(violations)
}

/// Checks forward non-interleaving on every reachable state, through both
/// independent checkers, and records any state on which they disagree.
pub fn check_forward_noninterleaving(log: &ExecutionLog) -> Result<ForwardReport, OracleError> {
    let origins = extract_origins(log)?;
    let states = reachable_states(log)?;
    let mut report = ForwardReport::default();
    for state in &states {
        let view = StateView::new(state);
        let adjacency = adjacency_violations(&view, &origins)?;
        let traversal = traversal_violations(&view, &origins)?;
        if adjacency.is_empty() != traversal.is_empty() {
            report.disagreements.push(view.text.clone());
        }
        report.adjacency.violations.extend(adjacency);
        report.traversal.violations.extend(traversal);
    }
    Ok(report)
}

/// Backward rule with its one exception. For each present element `B`, the
/// latest present element `A` whose right origin is `B` must sit immediately
/// before `B` — unless a *bystander* element makes that impossible: an
/// element outside `A`'s left-origin subtree that settled strictly between
/// `A`'s left origin and `B`. Such a bystander is itself required to sit
/// between `A` and `B`.
fn backward_violations(
    view: &StateView<'_>,
    origins: &Origins,
) -> Result<Vec<Violation>, OracleError> {
    let mut latest: HashMap<&ElementId, (usize, &ElementId)> = HashMap::new();
    for (k, e) in view.entries.iter().enumerate() {
        let anchor = origins
            .right_of(&e.id)
            .ok_or_else(|| OracleError::UnknownElement { id: e.id.clone() })?;
        if let RightOrigin::Element(b) = anchor {
            // The end sentinel imposes no adjacency; an anchor missing from
            // this state (impossible for causally closed states) neither.
            if view.pos.contains_key(b) {
                latest.insert(b, (k, &e.id));
            }
        }
    }
    let mut items: Vec<(&ElementId, (usize, &ElementId))> = latest.into_iter().collect();
    items.sort_by_key(|(_, (k, _))| *k);

    let mut violations = Vec::new();
    for (b, (ka, a)) in items {
        let kb = view.pos[b];
        if ka + 1 == kb {
            continue;
        }
        let not_adjacent = || Violation::BackwardAdjacency {
            element: a.clone(),
            anchor: b.clone(),
            state: view.text.clone(),
        };
        let Some(lo_a) = origins.left_of(a) else {
            return Err(OracleError::UnknownElement { id: a.clone() });
        };
        let Some(lo_b) = origins.left_of(b) else {
            return Err(OracleError::UnknownElement { id: b.clone() });
        };
        // With equal left origins no bystander can exist, so adjacency is
        // mandatory.
        if lo_a == lo_b {
            violations.push(not_adjacent());
            continue;
        }
        // Bystanders live strictly between A's left origin and B and outside
        // A's left-origin subtree.
        let from = match lo_a {
            LeftOrigin::Start => 0,
            LeftOrigin::Element(x) => match view.pos.get(x) {
                Some(p) => p + 1,
                None => {
                    violations.push(not_adjacent());
                    continue;
                }
            },
        };
        let window = view.entries.get(from..kb).unwrap_or_default();
        let bystanders: Vec<(usize, &ElementId)> = window
            .iter()
            .enumerate()
            .map(|(off, e)| (from + off, &e.id))
            .filter(|(_, c)| !origins.is_left_descendant(c, lo_a))
            .collect();
        if bystanders.is_empty() {
            violations.push(not_adjacent());
            continue;
        }
        for (kc, c) in bystanders {
            if !(ka < kc && kc < kb) {
                violations.push(Violation::BackwardBystander {
                    element: a.clone(),
                    anchor: b.clone(),
                    bystander: c.clone(),
                    state: view.text.clone(),
                });
            }
        }
    }
    Ok(violations)
}

/// Tie rule: elements that share both origins were inserted concurrently
/// into the exact same gap and must appear in ascending id order.
fn tie_order_violations(
    view: &StateView<'_>,
    origins: &Origins,
) -> Result<Vec<Violation>, OracleError> {
    let mut groups: HashMap<(&LeftOrigin, &RightOrigin), Vec<&ElementId>> = HashMap::new();
    for e in view.entries {
        let lo = origins
            .left_of(&e.id)
            .ok_or_else(|| OracleError::UnknownElement { id: e.id.clone() })?;
        let ro = origins
            .right_of(&e.id)
            .ok_or_else(|| OracleError::UnknownElement { id: e.id.clone() })?;
        // Scanning in state order keeps each group position-sorted.
        groups.entry((lo, ro)).or_default().push(&e.id);
    }
    let mut items: Vec<Vec<&ElementId>> = groups.into_values().collect();
    items.sort_by_key(|group| view.pos[group[0]]);

    let mut violations = Vec::new();
    for group in items {
        for pair in group.windows(2) {
            if pair[0] > pair[1] {
                violations.push(Violation::ConcurrentIdOrder {
                    before: pair[0].clone(),
                    after: pair[1].clone(),
                    state: view.text.clone(),
                });
            }
        }
    }
    Ok(violations)
}

/// Checks maximal non-interleaving on every reachable state: the forward
/// rule, the backward rule with its bystander exception, and the id-order
/// tie rule.
pub fn check_maximal_noninterleaving(log: &ExecutionLog) -> Result<Verdict, OracleError> {
    let origins = extract_origins(log)?;
    let states = reachable_states(log)?;
    let mut violations = Vec::new();
    for state in &states {
        let view = StateView::new(state);
        violations.extend(adjacency_violations(&view, &origins)?);
        violations.extend(backward_violations(&view, &origins)?);
        violations.extend(tie_order_violations(&view, &origins)?);
    }
    Ok(Verdict { violations })
}

/// Recomputes the converged order from origins alone.
///
/// The rules, applied recursively:
///
/// * An element comes directly after its left origin's whole run: elements
///   are grouped under their left-origin ancestry, ancestors first.
/// * Elements sharing a left origin `P` are ordered by chasing right origins
///   *within* that sibling set: an element anchored (via right origin) on a
///   sibling comes before that sibling, forming chains that are emitted
///   children-first; forks inside a chain are ordered by id.
/// * Chain heads whose right origins differ are ordered by *descending*
///   right origin under [`Variant::FugueMax`] (the list end counting as the
///   latest), and by ascending id under [`Variant::Fugue`]; equal right
///   origins fall back to ascending id.
struct OrderPredictor<'a> {
    origins: &'a Origins,
    variant: Variant,
}

impl OrderPredictor<'_> {
    fn lo_path(&self, e: &ElementId) -> Vec<ElementId> {
        let mut path = vec![e.clone()];
        let mut cur = e.clone();
        while let Some(LeftOrigin::Element(p)) = self.origins.left_of(&cur) {
            path.push(p.clone());
            cur = p.clone();
        }
        path.reverse();
        path
    }

    /// The chain from `e` up through right origins that stay inside the
    /// sibling set anchored at `anchor`, outermost first.
    fn chain_path(&self, anchor: &LeftOrigin, e: &ElementId) -> Vec<ElementId> {
        let mut path = vec![e.clone()];
        loop {
            let cur = path.last().expect("path never empty");
            match self.origins.right_of(cur) {
                Some(RightOrigin::Element(q))
                    if self.origins.left_of(q) == Some(anchor) =>
                {
                    path.push(q.clone());
                }
                _ => break,
            }
        }
        path.reverse();
        path
    }

    fn cmp_elements(&self, a: &ElementId, b: &ElementId) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let pa = self.lo_path(a);
        let pb = self.lo_path(b);
        let shared = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count();
        if shared == pa.len() {
            return Ordering::Less; // a is an ancestor of b: runs open ancestor-first
        }
        if shared == pb.len() {
            return Ordering::Greater;
        }
        let anchor = if shared == 0 {
            LeftOrigin::Start
        } else {
            LeftOrigin::Element(pa[shared - 1].clone())
        };
        self.cmp_siblings(&anchor, &pa[shared], &pb[shared])
    }

    fn cmp_siblings(&self, anchor: &LeftOrigin, x: &ElementId, y: &ElementId) -> Ordering {
        let cx = self.chain_path(anchor, x);
        let cy = self.chain_path(anchor, y);
        if cx[0] == cy[0] {
            let shared = cx.iter().zip(&cy).take_while(|(a, b)| a == b).count();
            if shared == cx.len() {
                return Ordering::Greater; // x is chained above y: chains emit children first
            }
            if shared == cy.len() {
                return Ordering::Less;
            }
            return cx[shared].cmp(&cy[shared]);
        }
        let rx = self.origins.right_of(&cx[0]).expect("chain heads are inserted");
        let ry = self.origins.right_of(&cy[0]).expect("chain heads are inserted");
        if rx == ry {
            return cx[0].cmp(&cy[0]);
        }
        match self.variant {
            Variant::Fugue => cx[0].cmp(&cy[0]),
            Variant::FugueMax => match (rx, ry) {
                (RightOrigin::End, _) => Ordering::Less,
                (_, RightOrigin::End) => Ordering::Greater,
                (RightOrigin::Element(qx), RightOrigin::Element(qy)) => {
                    // Later right origins come first; recursion terminates
                    // because right origins are strictly older elements.
                    self.cmp_elements(qy, qx)
                }
            },
        }
    }
}

/// The converged order of all inserted elements, recomputed from origins
/// alone (no trees, no replay).
pub fn predicted_order(log: &ExecutionLog) -> Result<Vec<ElementId>, OracleError> {
    let origins = extract_origins(log)?;
    let predictor = OrderPredictor {
        origins: &origins,
        variant: log.variant,
    };
    let mut ids: Vec<ElementId> = log
        .ops
        .iter()
        .filter_map(|o| match &o.msg {
            OpMessage::Insert { id, .. } => Some(id.clone()),
            OpMessage::Delete { .. } => None,
        })
        .collect();
    ids.sort_by(|a, b| predictor.cmp_elements(a, b));
    Ok(ids)
}

/// Checks that the origin-predicted order equals the engine's converged
/// order, element for element.
pub fn check_predicted_order(log: &ExecutionLog) -> Result<Verdict, OracleError> {
    let predicted = predicted_order(log)?;
    let actual = shared_order(log)?.entries;
    let mut violations = Vec::new();
    if predicted != actual {
        violations.push(Violation::PredictedOrderMismatch {
            predicted: render_ids(&predicted),
            actual: render_ids(&actual),
        });
    }
    Ok(Verdict { violations })
}

/// Exhaustive set-pair search is bounded to executions with at most this
/// many inserts (the search visits every pair of disjoint subsets).
pub const SET_SEARCH_MAX_INSERTS: usize = 12;

/// How one pair of element sets relates to the requirement that concurrent
/// same-location runs stay contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetPairStatus {
    /// Every element of one set is concurrent with every element of the
    /// other.
    pub mutually_concurrent: bool,
    /// Replaying only the two sets' inserts and their causal predecessors
    /// leaves the sets' elements contiguous: they all target one location.
    pub isolated_contiguous: bool,
    /// In the converged order, one set lies entirely before the other.
    pub separated: bool,
}

impl SetPairStatus {
    /// The pair satisfies the hypotheses of the contiguity requirement.
    pub fn hypotheses_hold(&self) -> bool {
        self.mutually_concurrent && self.isolated_contiguous
    }

    /// The pair refutes the requirement: it qualifies, yet no side stayed
    /// contiguous.
    pub fn interleaved(&self) -> bool {
        self.hypotheses_hold() && !self.separated
    }
}

/// A concrete refutation found by [`find_interleaved_concurrent_sets`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetPairWitness {
    /// First set, in converged order.
    pub x: Vec<ElementId>,
    /// Second set, in converged order.
    pub y: Vec<ElementId>,
    /// The full converged element order.
    pub final_order: Vec<ElementId>,
}

fn stamp_precedes(a: &CausalStamp, b: &CausalStamp) -> bool {
    if a.origin == b.origin {
        a.seq < b.seq
    } else {
        b.deps.get(&a.origin) >= a.seq
    }
}

struct SetPairChecker<'a> {
    log: &'a ExecutionLog,
    pairs: Vec<(CausalStamp, OpMessage)>,
    /// Insert op index per element.
    op_of: HashMap<&'a ElementId, usize>,
    shared: SharedOrder,
}

impl<'a> SetPairChecker<'a> {
    fn new(log: &'a ExecutionLog) -> Result<Self, OracleError> {
        let pairs = op_pairs(log);
        let op_of = log
            .ops
            .iter()
            .enumerate()
            .filter_map(|(k, o)| match &o.msg {
                OpMessage::Insert { id, .. } => Some((id, k)),
                OpMessage::Delete { .. } => None,
            })
            .collect();
        let shared = shared_order(log)?;
        Ok(SetPairChecker {
            log,
            pairs,
            op_of,
            shared,
        })
    }

    fn op_index(&self, id: &ElementId) -> Result<usize, OracleError> {
        self.op_of
            .get(id)
            .copied()
            .ok_or_else(|| OracleError::UnknownElement { id: id.clone() })
    }

    fn concurrent(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.pairs[i].0, &self.pairs[j].0);
        !stamp_precedes(a, b) && !stamp_precedes(b, a)
    }

    fn status(&self, xs: &[usize], ys: &[usize]) -> Result<SetPairStatus, OracleError> {
        let mutually_concurrent = xs
            .iter()
            .all(|&i| ys.iter().all(|&j| self.concurrent(i, j)));

        // Replay the sets' inserts plus everything causally before them.
        let members: HashSet<usize> = xs.iter().chain(ys).copied().collect();
        let closure: Vec<usize> = (0..self.pairs.len())
            .filter(|&j| {
                members.contains(&j)
                    || members
                        .iter()
                        .any(|&i| stamp_precedes(&self.pairs[j].0, &self.pairs[i].0))
            })
            .collect();
        let isolated = replay_subset(&self.pairs, &closure, self.log.variant)?;
        let union_pos: Vec<usize> = isolated
            .iter()
            .enumerate()
            .filter(|(_, e)| members.contains(&self.op_of[&e.id]))
            .map(|(k, _)| k)
            .collect();
        let isolated_contiguous = union_pos.len() == members.len()
            && union_pos
                .last()
                .zip(union_pos.first())
                .is_some_and(|(hi, lo)| hi - lo + 1 == union_pos.len());

        let final_pos = |ops: &[usize]| -> Vec<usize> {
            let mut ps: Vec<usize> = ops
                .iter()
                .map(|&i| self.shared.position[self.pairs[i].1.id()])
                .collect();
            ps.sort_unstable();
            ps
        };
        let px = final_pos(xs);
        let py = final_pos(ys);
        let separated = px.last() < py.first() || py.last() < px.first();

        Ok(SetPairStatus {
            mutually_concurrent,
            isolated_contiguous,
            separated,
        })
    }
}

/// How two element sets relate to the requirement that mutually concurrent,
/// same-location runs end up on opposite sides of each other. The sets must
/// be non-empty and disjoint.
pub fn concurrent_sets_status(
    log: &ExecutionLog,
    xs: &[ElementId],
    ys: &[ElementId],
) -> Result<SetPairStatus, OracleError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(OracleError::InvalidSetPair {
            reason: "a set is empty",
        });
    }
    if xs.iter().any(|x| ys.contains(x)) {
        return Err(OracleError::InvalidSetPair {
            reason: "the sets overlap",
        });
    }
    let checker = SetPairChecker::new(log)?;
    let xi: Vec<usize> = xs
        .iter()
        .map(|id| checker.op_index(id))
        .collect::<Result<_, _>>()?;
    let yi: Vec<usize> = ys
        .iter()
        .map(|id| checker.op_index(id))
        .collect::<Result<_, _>>()?;
    checker.status(&xi, &yi)
}

/// Searches every pair of disjoint, non-empty element sets for one that
/// satisfies the contiguity hypotheses (mutually concurrent, one shared
/// location) yet interleaves in the converged order.
///
/// Any converged run of four concurrent single-element inserts yields such a
/// pair (alternating elements), which is exactly why contiguity of *all*
/// concurrent same-location runs cannot be promised by any algorithm and the
/// forward/maximal properties are used instead.
pub fn find_interleaved_concurrent_sets(
    log: &ExecutionLog,
) -> Result<Option<SetPairWitness>, OracleError> {
    let checker = SetPairChecker::new(log)?;
    let inserts: Vec<usize> = (0..checker.pairs.len())
        .filter(|&i| checker.pairs[i].1.is_insert())
        .collect();
    let n = inserts.len();
    if n > SET_SEARCH_MAX_INSERTS {
        return Err(OracleError::SearchSpaceTooLarge {
            inserts: n,
            max: SET_SEARCH_MAX_INSERTS,
        });
    }

    let expand = |mask: u32| -> Vec<usize> {
        (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| inserts[k])
            .collect()
    };

    for x_mask in 1u32..(1 << n) {
        let rest = !x_mask & ((1u32 << n) - 1);
        let mut y_mask = rest;
        while y_mask != 0 {
            // The relation is symmetric; visit each unordered pair once.
            if x_mask < y_mask {
                let xs = expand(x_mask);
                let ys = expand(y_mask);
                let quick_concurrent = xs
                    .iter()
                    .all(|&i| ys.iter().all(|&j| checker.concurrent(i, j)));
                if quick_concurrent {
                    let status = checker.status(&xs, &ys)?;
                    if status.interleaved() {
                        let by_final = |ops: Vec<usize>| -> Vec<ElementId> {
                            let mut ids: Vec<ElementId> = ops
                                .into_iter()
                                .map(|i| checker.pairs[i].1.id().clone())
                                .collect();
                            ids.sort_by_key(|id| checker.shared.position[id]);
                            ids
                        };
                        return Ok(Some(SetPairWitness {
                            x: by_final(xs),
                            y: by_final(ys),
                            final_order: checker.shared.entries.clone(),
                        }));
                    }
                }
            }
            y_mask = (y_mask - 1) & rest;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{fuzz_execution, run_script, snapshot_text, FuzzConfig, Script, ScriptStep};

    fn rid(s: &str) -> ReplicaId {
        ReplicaId::new(s).unwrap()
    }

    fn eid(s: &str, c: u64) -> ElementId {
        ElementId::new(rid(s), c)
    }

    fn insert(replica: &str, index: usize, value: char) -> ScriptStep {
        ScriptStep::Insert {
            replica: rid(replica),
            index,
            value,
        }
    }

    fn deliver(replica: &str, origin: &str, seq: u64) -> ScriptStep {
        ScriptStep::Deliver {
            replica: rid(replica),
            origin: rid(origin),
            seq,
        }
    }

    fn sync(a: &str, b: &str) -> ScriptStep {
        ScriptStep::Sync {
            a: rid(a),
            b: rid(b),
        }
    }

    fn script(replicas: &[&str], steps: Vec<ScriptStep>) -> Script {
        Script {
            replicas: replicas.iter().map(|r| rid(r)).collect(),
            steps,
        }
    }

    /// Three replicas seed A, B, C concurrently; one replica that saw only
    /// A and C wedges X between them; everyone converges.
    fn forced_wedge_script() -> Script {
        script(
            &["1", "2", "3"],
            vec![
                insert("1", 0, 'A'),
                insert("2", 0, 'B'),
                insert("3", 0, 'C'),
                deliver("1", "3", 1),
                insert("1", 1, 'X'),
                deliver("1", "2", 1),
                sync("2", "1"),
                sync("3", "1"),
            ],
        )
    }

    /// The forced wedge plus a second wedger that saw A and B instead.
    fn double_wedge_script() -> Script {
        script(
            &["1", "2", "3"],
            vec![
                insert("1", 0, 'A'),
                insert("2", 0, 'B'),
                insert("3", 0, 'C'),
                deliver("1", "3", 1),
                insert("1", 1, 'X'),
                deliver("2", "1", 1),
                insert("2", 1, 'Y'),
                deliver("1", "2", 1),
                deliver("1", "2", 2),
                sync("2", "1"),
                sync("3", "1"),
            ],
        )
    }

    /// The double wedge with five replicas so that the second wedger's id
    /// sorts *below* the first wedger's despite the same timing.
    fn double_wedge_low_id_script() -> Script {
        script(
            &["1", "2", "3", "5", "4"],
            vec![
                insert("1", 0, 'A'),
                insert("2", 0, 'B'),
                insert("3", 0, 'C'),
                deliver("5", "1", 1),
                deliver("5", "3", 1),
                insert("5", 1, 'X'),
                deliver("4", "1", 1),
                deliver("4", "2", 1),
                insert("4", 1, 'Y'),
                sync("1", "5"),
                sync("1", "4"),
                sync("2", "1"),
                sync("3", "1"),
                sync("5", "1"),
                sync("4", "1"),
            ],
        )
    }

    fn converged_text(log: &ExecutionLog) -> String {
        snapshot_text(log.final_snapshot(&log.replicas[0]).unwrap())
    }

    #[test]
    fn forced_wedge_passes_every_check() {
        for variant in [Variant::Fugue, Variant::FugueMax] {
            let log = run_script(&forced_wedge_script(), variant).unwrap();
            assert_eq!(converged_text(&log), "AXBC");
            assert!(check_strong_list(&log).unwrap().is_pass());
            let forward = check_forward_noninterleaving(&log).unwrap();
            assert!(forward.is_pass(), "{forward}");
            assert!(check_predicted_order(&log).unwrap().is_pass());
        }
        let log = run_script(&forced_wedge_script(), Variant::FugueMax).unwrap();
        let maximal = check_maximal_noninterleaving(&log).unwrap();
        assert!(maximal.is_pass(), "{maximal}");
    }

    #[test]
    fn double_wedge_extracts_exact_origin_trees() {
        let log = run_script(&double_wedge_script(), Variant::FugueMax).unwrap();
        assert_eq!(converged_text(&log), "AXYBC");
        let origins = extract_origins(&log).unwrap();

        let (a, b, c) = (eid("1", 0), eid("2", 0), eid("3", 0));
        let (x, y) = (eid("1", 1), eid("2", 1));
        assert_eq!(
            origins.left_children(&LeftOrigin::Start),
            vec![a.clone(), b.clone(), c.clone()]
        );
        assert_eq!(
            origins.left_children(&LeftOrigin::Element(a.clone())),
            vec![x.clone(), y.clone()]
        );
        assert_eq!(
            origins.right_cohort(&RightOrigin::End),
            vec![a.clone(), b.clone(), c.clone()]
        );
        assert_eq!(
            origins.right_cohort(&RightOrigin::Element(b.clone())),
            vec![y.clone()]
        );
        assert_eq!(
            origins.right_cohort(&RightOrigin::Element(c)),
            vec![x.clone()]
        );
        assert!(origins.is_left_descendant(&x, &LeftOrigin::Element(a.clone())));
        assert!(origins.is_left_descendant(&x, &LeftOrigin::Start));
        assert!(!origins.is_left_descendant(&b, &LeftOrigin::Element(a)));

        let maximal = check_maximal_noninterleaving(&log).unwrap();
        assert!(maximal.is_pass(), "{maximal}");
    }

    #[test]
    fn low_id_double_wedge_separates_the_variants() {
        let max_log = run_script(&double_wedge_low_id_script(), Variant::FugueMax).unwrap();
        assert_eq!(converged_text(&max_log), "AXYBC");
        assert!(check_maximal_noninterleaving(&max_log).unwrap().is_pass());
        assert!(check_predicted_order(&max_log).unwrap().is_pass());

        let fugue_log = run_script(&double_wedge_low_id_script(), Variant::Fugue).unwrap();
        assert_eq!(converged_text(&fugue_log), "AYXBC");
        assert!(check_strong_list(&fugue_log).unwrap().is_pass());
        assert!(check_forward_noninterleaving(&fugue_log).unwrap().is_pass());
        assert!(check_predicted_order(&fugue_log).unwrap().is_pass());

        let maximal = check_maximal_noninterleaving(&fugue_log).unwrap();
        assert!(!maximal.is_pass());
        assert!(
            maximal.violations.iter().any(|v| matches!(
                v,
                Violation::BackwardAdjacency { element, anchor, .. }
                    if *element == eid("4", 0) && *anchor == eid("2", 0)
            )),
            "{maximal}"
        );
    }

    #[test]
    fn swapped_snapshots_are_detected() {
        let mut log = run_script(&double_wedge_script(), Variant::FugueMax).unwrap();
        assert!(check_strong_list(&log).unwrap().is_pass());

        // Swap two differing snapshots of one replica.
        let (r, i, j) = log
            .snapshots
            .iter()
            .enumerate()
            .find_map(|(r, snaps)| {
                (0..snaps.len())
                    .flat_map(|i| (i + 1..snaps.len()).map(move |j| (i, j)))
                    .find(|&(i, j)| snaps[i] != snaps[j])
                    .map(|(i, j)| (r, i, j))
            })
            .expect("some replica has two distinct states");
        log.snapshots[r].swap(i, j);

        let verdict = check_strong_list(&log).unwrap();
        assert!(verdict
            .violations
            .iter()
            .any(|v| matches!(v, Violation::StateOrderMismatch { .. })));
    }

    #[test]
    fn interleaved_state_fails_both_forward_checkers() {
        // Two concurrent forward runs, artificially interleaved: m i typed
        // left to right, e wedged between them by hand.
        let (m, i, e) = (eid("1", 1), eid("1", 2), eid("2", 1));
        let mut origins = Origins::default();
        origins.left.insert(m.clone(), LeftOrigin::Start);
        origins
            .left
            .insert(i.clone(), LeftOrigin::Element(m.clone()));
        origins.left.insert(e.clone(), LeftOrigin::Start);
        for id in [&m, &i, &e] {
            origins.right.insert(id.clone(), RightOrigin::End);
        }
        let entry = |id: &ElementId, value: char| TraversalEntry {
            id: id.clone(),
            value,
            is_deleted: false,
        };
        let state = vec![entry(&m, 'm'), entry(&e, 'e'), entry(&i, 'i')];
        let view = StateView::new(&state);

        let adjacency = adjacency_violations(&view, &origins).unwrap();
        let traversal = traversal_violations(&view, &origins).unwrap();
        assert!(!adjacency.is_empty());
        assert!(!traversal.is_empty());
    }

    #[test]
    fn concurrent_singletons_cannot_all_be_separated() {
        // Four replicas each insert one element into an empty list.
        let four = script(
            &["1", "2", "3", "4"],
            vec![
                insert("1", 0, 'a'),
                insert("2", 0, 'b'),
                insert("3", 0, 'c'),
                insert("4", 0, 'd'),
                sync("1", "2"),
                sync("1", "3"),
                sync("1", "4"),
                sync("2", "1"),
                sync("3", "1"),
                sync("4", "1"),
            ],
        );
        let log = run_script(&four, Variant::FugueMax).unwrap();
        assert_eq!(converged_text(&log), "abcd");

        // The alternating pair qualifies and interleaves.
        let order = shared_order(&log).unwrap().entries;
        let xs = vec![order[0].clone(), order[2].clone()];
        let ys = vec![order[1].clone(), order[3].clone()];
        let status = concurrent_sets_status(&log, &xs, &ys).unwrap();
        assert!(status.hypotheses_hold());
        assert!(!status.separated);
        assert!(status.interleaved());

        let witness = find_interleaved_concurrent_sets(&log).unwrap();
        assert!(witness.is_some());

        // Three concurrent singletons already refute separation: {1st, 3rd}
        // against {2nd}.
        let three = script(
            &["1", "2", "3"],
            vec![
                insert("1", 0, 'a'),
                insert("2", 0, 'b'),
                insert("3", 0, 'c'),
                sync("1", "2"),
                sync("1", "3"),
                sync("2", "1"),
                sync("3", "1"),
            ],
        );
        let log = run_script(&three, Variant::FugueMax).unwrap();
        assert!(find_interleaved_concurrent_sets(&log).unwrap().is_some());

        // A single replica has no concurrency at all: no pair qualifies.
        let solo = script(
            &["1"],
            vec![insert("1", 0, 'a'), insert("1", 1, 'b'), insert("1", 2, 'c')],
        );
        let log = run_script(&solo, Variant::FugueMax).unwrap();
        assert!(find_interleaved_concurrent_sets(&log).unwrap().is_none());
    }

    #[test]
    fn sequential_editing_with_deletes_passes_every_check() {
        let steps = vec![
            insert("1", 0, 'h'),
            insert("1", 1, 'i'),
            insert("1", 2, '!'),
            ScriptStep::Delete {
                replica: rid("1"),
                index: 1,
            },
            insert("1", 1, 'e'),
            sync("2", "1"),
        ];
        for variant in [Variant::Fugue, Variant::FugueMax] {
            let log = run_script(&script(&["1", "2"], steps.clone()), variant).unwrap();
            assert_eq!(converged_text(&log), "he!");
            assert!(check_strong_list(&log).unwrap().is_pass());
            assert!(check_forward_noninterleaving(&log).unwrap().is_pass());
            assert!(check_predicted_order(&log).unwrap().is_pass());
        }
        let log = run_script(&script(&["1", "2"], steps), Variant::FugueMax).unwrap();
        assert!(check_maximal_noninterleaving(&log).unwrap().is_pass());
    }

    #[test]
    fn fuzzed_logs_satisfy_the_oracles() {
        for variant in [Variant::Fugue, Variant::FugueMax] {
            for seed in 0..3 {
                let log = fuzz_execution(FuzzConfig {
                    seed,
                    replicas: 3,
                    ops: 8, // small enough to also enumerate every reachable state
                    variant,
                    check_commutativity: false,
                });
                assert!(check_strong_list(&log).unwrap().is_pass());
                let forward = check_forward_noninterleaving(&log).unwrap();
                assert!(forward.is_pass(), "seed {seed} {variant}: {forward}");
                assert!(check_predicted_order(&log).unwrap().is_pass());
                if variant == Variant::FugueMax {
                    let maximal = check_maximal_noninterleaving(&log).unwrap();
                    assert!(maximal.is_pass(), "seed {seed}: {maximal}");
                }
            }
        }
    }

    #[test]
    fn empty_log_passes_trivially() {
        let log = run_script(&script(&["1"], vec![]), Variant::Fugue).unwrap();
        assert!(check_strong_list(&log).unwrap().is_pass());
        assert!(check_forward_noninterleaving(&log).unwrap().is_pass());
        assert!(check_maximal_noninterleaving(&log).unwrap().is_pass());
        assert!(check_predicted_order(&log).unwrap().is_pass());
        assert!(find_interleaved_concurrent_sets(&log).unwrap().is_none());
    }
}
