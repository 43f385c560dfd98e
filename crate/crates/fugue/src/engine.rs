//! The two list-merge engines: local operation generators and the remote
//! effector.
//!
//! A [`Replica`] owns one [`Tree`] and a counter for minting fresh element
//! ids. Local edits ([`Replica::insert`], [`Replica::delete`]) mutate the
//! local tree immediately (self-delivery) and return an [`OpMessage`] for
//! broadcast; [`Replica::apply`] is the effector that every *other* replica
//! runs on delivery. Causal delivery is the caller's contract: an insert's
//! parent (and right origin, where recorded) and a delete's target must have
//! been delivered first. Violations are reported as [`ProtocolError`]s, never
//! papered over.
//!
//! # Where a new element goes
//!
//! An insert at visible index `i` is anchored to its *left origin* — the
//! element at visible index `i-1` (or the root for `i = 0`) — and its *right
//! origin* — the node directly after the left origin in the full,
//! tombstone-inclusive traversal (or the end sentinel). The generator then
//! picks the tree position:
//!
//! * if the left origin has no right children, the new node becomes a **right
//!   child of the left origin**;
//! * otherwise it becomes a **left child of the right origin**.
//!
//! Both variants place nodes identically; they differ only in how concurrent
//! *same-side siblings* are ordered:
//!
//! * [`Variant::Fugue`] orders all sibling lists by ascending element id.
//! * [`Variant::FugueMax`] tags every right child with its right origin and
//!   orders right-sibling lists by *descending* right origin (later origins
//!   first, the end sentinel latest of all), breaking ties by ascending id.
//!   Left-child lists are still id-ordered.
//!
//! Right origins are compared by position in the current tombstone-inclusive
//! traversal. Both candidates are causally prior to both siblings, so they
//! are present, and the relative order of existing nodes never changes
//! (prefix stability) — the comparison gives the same answer on every
//! replica at every time.
//!
//! # Cost model
//!
//! Local edits resolve their anchors through the tree's balanced order
//! index, so each insert or delete costs O(log n) expected regardless of
//! edit pattern — sequential typing degenerates the coordinate tree into a
//! chain, and backspace-heavy sessions pile tombstones at the traversal
//! tail, but neither shape slows the index down.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::id::{ElementId, Parent, ReplicaId, RightOrigin, Side};
use crate::tree::{TraversalEntry, Tree, TreeError};

/// Which sibling-ordering rule a replica runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Same-side siblings ordered by ascending element id.
    Fugue,
    /// Right siblings ordered by descending right origin, then ascending id.
    FugueMax,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Fugue => "fugue",
            Variant::FugueMax => "fuguemax",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fugue" => Ok(Variant::Fugue),
            "fuguemax" | "fugue-max" | "fugue_max" => Ok(Variant::FugueMax),
            other => Err(format!(
                "unknown variant {other:?} (expected \"fugue\" or \"fuguemax\")"
            )),
        }
    }
}

/// A broadcast operation. Everything a remote replica needs to replay the
/// edit lives in the message; messages are immutable once created.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OpMessage {
    Insert {
        id: ElementId,
        value: char,
        parent: Parent,
        side: Side,
        /// Recorded on FugueMax right children (the sibling-order key);
        /// absent on left children and on every Fugue node.
        right_origin: Option<RightOrigin>,
    },
    Delete {
        /// The element to tombstone.
        id: ElementId,
    },
}

impl OpMessage {
    /// The id this operation creates (insert) or targets (delete).
    pub fn id(&self) -> &ElementId {
        match self {
            OpMessage::Insert { id, .. } => id,
            OpMessage::Delete { id } => id,
        }
    }

    pub fn is_insert(&self) -> bool {
        matches!(self, OpMessage::Insert { .. })
    }
}

/// A breach of the causal-delivery contract (or a malformed message). These
/// indicate a bug in the transport or harness, so the engine reports them
/// loudly and leaves its state untouched.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    /// The same insert delivered twice; the broadcast layer owns
    /// exactly-once delivery.
    #[error("insert {id} delivered more than once")]
    DuplicateInsert { id: ElementId },
    /// An insert arrived before its parent.
    #[error("insert {id} references missing parent {parent}")]
    MissingParent { id: ElementId, parent: ElementId },
    /// An insert arrived before its recorded right origin.
    #[error("insert {id} references missing right origin {origin}")]
    MissingRightOrigin { id: ElementId, origin: ElementId },
    /// A delete arrived before (or without) its target's insert.
    #[error("delete targets missing element {id}")]
    MissingDeleteTarget { id: ElementId },
    /// An insert claimed to be a left child of the root.
    #[error("insert {id} claims a position before the document start")]
    InsertBeforeRoot { id: ElementId },
    /// Right-origin annotation does not match the replica's variant: present
    /// where it must be absent, or vice versa.
    #[error("insert {id} {problem} a right-origin annotation for variant {variant}")]
    AnnotationMismatch {
        id: ElementId,
        variant: Variant,
        /// `"carries"` or `"lacks"`.
        problem: &'static str,
    },
    /// Arena or counter width exhausted.
    #[error("capacity exceeded at {id}")]
    CapacityExceeded { id: ElementId },
}

/// Errors from replica operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    /// Insert position past the end of the document (`index > len`).
    #[error("insert index {index} out of bounds (document length {len})")]
    InsertIndexOutOfBounds { index: usize, len: usize },
    /// Delete position with no element under it (`index >= len`).
    #[error("delete index {index} out of bounds (document length {len})")]
    DeleteIndexOutOfBounds { index: usize, len: usize },
    /// The delivered message violates the causal-delivery contract.
    #[error("causal-delivery violation: {0}")]
    Protocol(#[from] ProtocolError),
}

/// One collaborating copy of the document.
#[derive(Debug, Clone)]
pub struct Replica {
    id: ReplicaId,
    variant: Variant,
    tree: Tree,
    /// Inserts this replica has generated; the next fresh counter.
    counter: u64,
}

impl Replica {
    pub fn new(id: ReplicaId, variant: Variant) -> Self {
        Replica {
            id,
            variant,
            tree: Tree::new(),
            counter: 0,
        }
    }

    /// Rebuilds a replica around an existing tree (document loading).
    /// `counter` must exceed every counter the tree holds for `id`, so that
    /// freshly minted ids cannot collide.
    pub(crate) fn from_parts(
        id: ReplicaId,
        variant: Variant,
        tree: Tree,
        counter: u64,
    ) -> Result<Self, String> {
        for entry in tree.traverse(true) {
            if entry.id.replica == id && entry.id.counter >= counter {
                return Err(format!(
                    "stored counter {counter} does not cover existing element {}",
                    entry.id
                ));
            }
        }
        Ok(Replica {
            id,
            variant,
            tree,
            counter,
        })
    }

    pub fn replica_id(&self) -> &ReplicaId {
        &self.id
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// The underlying tree (read-only; all mutation goes through ops).
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    /// Number of inserts this replica has generated.
    pub fn ops_generated(&self) -> u64 {
        self.counter
    }

    /// Visible document length.
    pub fn len(&self) -> usize {
        self.tree.visible_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The visible document text.
    pub fn document(&self) -> String {
        self.tree.values()
    }

    /// The full per-element state: every element in traversal order with its
    /// value and tombstone flag. This is what execution logs record.
    pub fn state(&self) -> Vec<TraversalEntry> {
        self.tree.traverse(true)
    }

    /// Inserts `value` at visible index `index` (`0 ≤ index ≤ len`), applies
    /// it locally, and returns the message to broadcast.
    pub fn insert(&mut self, index: usize, value: char) -> Result<OpMessage, EngineError> {
        let len = self.tree.visible_count();
        if index > len {
            return Err(EngineError::InsertIndexOutOfBounds { index, len });
        }
        // Anchors: left origin at visible index-1 (root if none); right
        // origin directly after it in the full traversal (end if none).
        let left_origin: Option<u32> = if index == 0 {
            None
        } else {
            Some(
                self.tree
                    .kth_visible_idx(index - 1)
                    .expect("index ≤ len was just checked"),
            )
        };
        let right_origin_idx: Option<u32> = match left_origin {
            None => self.tree.order_first(),
            Some(lo) => self.tree.order_successor(lo),
        };

        // Placement: right child of the left origin if that spot is free,
        // else left child of the right origin.
        let left_origin_free = self
            .tree
            .child_head_raw(left_origin, Side::Right)
            .is_none();
        let (parent, side) = if left_origin_free {
            let p = match left_origin {
                None => Parent::Root,
                Some(idx) => Parent::Element(self.tree.element_id(idx)),
            };
            (p, Side::Right)
        } else {
            // The left origin has right children, so its traversal successor
            // (the right origin) is one of its right descendants — a real
            // node, never the end sentinel.
            let ro = right_origin_idx.expect("non-free left origin has a successor");
            (Parent::Element(self.tree.element_id(ro)), Side::Left)
        };
        let annotation = if self.variant == Variant::FugueMax && side == Side::Right {
            Some(match right_origin_idx {
                Some(idx) => RightOrigin::Element(self.tree.element_id(idx)),
                None => RightOrigin::End,
            })
        } else {
            None
        };

        let id = ElementId::new(self.id.clone(), self.counter);
        let msg = OpMessage::Insert {
            id,
            value,
            parent,
            side,
            right_origin: annotation,
        };
        // Self-delivery through the general effector.
        self.apply_insert(&msg)?;
        self.counter += 1;
        Ok(msg)
    }

    /// Tombstones the element at visible index `index` (`index < len`),
    /// applies it locally, and returns the message to broadcast.
    pub fn delete(&mut self, index: usize) -> Result<OpMessage, EngineError> {
        let len = self.tree.visible_count();
        if index >= len {
            return Err(EngineError::DeleteIndexOutOfBounds { index, len });
        }
        let at = self
            .tree
            .kth_visible_idx(index)
            .expect("index < len was just checked");
        let target = self.tree.element_id(at);
        let deleted = self
            .tree
            .mark_deleted(&target)
            .expect("indexed target exists");
        debug_assert!(deleted, "indexed target was visible");
        Ok(OpMessage::Delete { id: target })
    }

    /// The remote effector: applies one delivered message. Inserts splice
    /// the node into its recorded parent's child list at the variant's
    /// sibling rank; deletes tombstone their target (idempotently, since
    /// concurrent replicas may both delete one element).
    pub fn apply(&mut self, msg: &OpMessage) -> Result<(), EngineError> {
        match msg {
            OpMessage::Insert { .. } => {
                self.apply_insert(msg)?;
            }
            OpMessage::Delete { id } => match self.tree.mark_deleted(id) {
                Ok(_) => {}
                Err(TreeError::UnknownId(id)) => {
                    return Err(ProtocolError::MissingDeleteTarget { id }.into());
                }
                Err(e) => unreachable!("mark_deleted only reports unknown ids: {e}"),
            },
        }
        Ok(())
    }

    /// Shared insert effector. Validates the message against the causal
    /// contract, computes the sibling rank, and attaches.
    fn apply_insert(&mut self, msg: &OpMessage) -> Result<(), EngineError> {
        let OpMessage::Insert {
            id,
            value,
            parent,
            side,
            right_origin,
        } = msg
        else {
            unreachable!("apply_insert called with a delete");
        };
        if self.tree.contains(id) {
            return Err(ProtocolError::DuplicateInsert { id: id.clone() }.into());
        }
        let parent_idx = self.tree.resolve_parent(parent).ok_or_else(|| {
            let Parent::Element(pid) = parent else {
                unreachable!("the root always resolves");
            };
            ProtocolError::MissingParent {
                id: id.clone(),
                parent: pid.clone(),
            }
        })?;
        if parent_idx.is_none() && *side == Side::Left {
            return Err(ProtocolError::InsertBeforeRoot { id: id.clone() }.into());
        }

        let annotated = self.variant == Variant::FugueMax && *side == Side::Right;
        match (annotated, right_origin) {
            (true, None) => {
                return Err(ProtocolError::AnnotationMismatch {
                    id: id.clone(),
                    variant: self.variant,
                    problem: "lacks",
                }
                .into());
            }
            (false, Some(_)) => {
                return Err(ProtocolError::AnnotationMismatch {
                    id: id.clone(),
                    variant: self.variant,
                    problem: "carries",
                }
                .into());
            }
            _ => {}
        }

        let rank = if annotated {
            let ro = right_origin.as_ref().expect("checked above");
            let ro_idx = match ro {
                RightOrigin::End => None,
                RightOrigin::Element(rid) => Some(self.tree.idx_of(rid).ok_or_else(|| {
                    ProtocolError::MissingRightOrigin {
                        id: id.clone(),
                        origin: rid.clone(),
                    }
                })?),
            };
            self.right_origin_rank(parent_idx, id, ro_idx)
        } else {
            self.id_rank(parent_idx, *side, id)
        };

        self.tree
            .attach(
                id.clone(),
                *value,
                parent.clone(),
                *side,
                if annotated { right_origin.clone() } else { None },
                rank,
            )
            .map_err(|e| match e {
                TreeError::CapacityExceeded(id) => ProtocolError::CapacityExceeded { id },
                // Everything else was pre-validated above.
                other => unreachable!("attach rejected a validated insert: {other}"),
            })?;
        Ok(())
    }

    /// Sibling rank under id order: the least position whose sibling has a
    /// greater id. Used for all left-child lists and for Fugue throughout.
    fn id_rank(&self, parent: Option<u32>, side: Side, new_id: &ElementId) -> usize {
        let mut rank = 0;
        let mut cursor = self.tree.child_head_raw(parent, side);
        while let Some(sib) = cursor {
            let (rep, ctr) = self.tree.id_parts_at(sib);
            if (&new_id.replica, new_id.counter) < (rep, ctr) {
                break;
            }
            rank += 1;
            cursor = self.tree.next_sibling_raw(sib);
        }
        rank
    }

    /// Sibling rank for FugueMax right children: the least position whose
    /// sibling has an *earlier* right origin (later origins sort first; the
    /// end sentinel is latest of all), with ascending-id tie-breaking.
    ///
    /// `new_ro`: `None` is the end sentinel, `Some` an element's arena slot.
    fn right_origin_rank(
        &self,
        parent: Option<u32>,
        new_id: &ElementId,
        new_ro: Option<u32>,
    ) -> usize {
        // Gather the existing siblings and their recorded origins.
        let mut sibs: Vec<(u32, Option<u32>)> = Vec::new();
        let mut cursor = self.tree.child_head_raw(parent, Side::Right);
        while let Some(sib) = cursor {
            let ro = self
                .tree
                .right_origin_raw(sib)
                .expect("right children carry origins under this variant");
            sibs.push((sib, ro));
            cursor = self.tree.next_sibling_raw(sib);
        }
        if sibs.is_empty() {
            return 0;
        }

        // Rank every involved origin by full-traversal position in one walk.
        // All origins are causally prior to their siblings, hence present,
        // and prefix stability makes these positions comparison-stable.
        let mut wanted: Vec<u32> = sibs.iter().filter_map(|&(_, ro)| ro).collect();
        wanted.extend(new_ro);
        wanted.sort_unstable();
        wanted.dedup();
        let mut position: HashMap<u32, usize> = HashMap::with_capacity(wanted.len());
        if !wanted.is_empty() {
            for (pos, idx) in self.tree.iter_idx().enumerate() {
                if wanted.binary_search(&idx).is_ok() {
                    position.insert(idx, pos);
                    if position.len() == wanted.len() {
                        break;
                    }
                }
            }
        }
        // The end sentinel orders after every element.
        let order_key = |ro: Option<u32>| match ro {
            None => usize::MAX,
            Some(idx) => position[&idx],
        };

        let new_key = order_key(new_ro);
        for (rank, &(sib, sib_ro)) in sibs.iter().enumerate() {
            let sib_key = order_key(sib_ro);
            if new_key > sib_key {
                return rank;
            }
            if new_key == sib_key {
                let (rep, ctr) = self.tree.id_parts_at(sib);
                if (&new_id.replica, new_id.counter) < (rep, ctr) {
                    return rank;
                }
            }
        }
        sibs.len()
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    fn rid(s: &str) -> ReplicaId {
        ReplicaId::new(s).unwrap()
    }

    fn eid(s: &str, c: u64) -> ElementId {
        ElementId::new(rid(s), c)
    }

    fn insert_msg(
        id: ElementId,
        value: char,
        parent: Parent,
        side: Side,
        right_origin: Option<RightOrigin>,
    ) -> OpMessage {
        OpMessage::Insert {
            id,
            value,
            parent,
            side,
            right_origin,
        }
    }

    /// A replica holding the fixed "abcdef" tree: `c` under the root; `a`,
    /// `b` left children of `c`; `e` a right child of `c` with `d` its left
    /// child and `f` its right child.
    fn abcdef_replica(variant: Variant) -> Replica {
        let mut r = Replica::new(rid("reader"), variant);
        let tag = |ro: RightOrigin| match variant {
            Variant::FugueMax => Some(ro),
            Variant::Fugue => None,
        };
        let c = Parent::Element(eid("w", 0));
        let e = Parent::Element(eid("w", 3));
        for msg in [
            insert_msg(eid("w", 0), 'c', Parent::Root, Side::Right, tag(RightOrigin::End)),
            insert_msg(eid("w", 1), 'a', c.clone(), Side::Left, None),
            insert_msg(eid("w", 2), 'b', c.clone(), Side::Left, None),
            insert_msg(
                eid("w", 3),
                'e',
                c.clone(),
                Side::Right,
                tag(RightOrigin::End),
            ),
            insert_msg(eid("w", 4), 'd', e.clone(), Side::Left, None),
            insert_msg(
                eid("w", 5),
                'f',
                e.clone(),
                Side::Right,
                tag(RightOrigin::End),
            ),
        ] {
            r.apply(&msg).unwrap();
        }
        assert_eq!(r.document(), "abcdef");
        r
    }

    #[test]
    fn insert_into_free_spot_becomes_right_child_of_left_origin() {
        let mut r = abcdef_replica(Variant::Fugue);
        let msg = r.insert(1, 'g').unwrap();
        assert_eq!(r.document(), "agbcdef");
        let OpMessage::Insert { id, parent, side, .. } = &msg else {
            panic!("insert returns an insert message");
        };
        assert_eq!(parent, &Parent::Element(eid("w", 1)), "parent is 'a'");
        assert_eq!(*side, Side::Right);
        // And the follow-up lands as a left child of g, the right origin.
        let g = id.clone();
        let msg2 = r.insert(1, 'h').unwrap();
        assert_eq!(r.document(), "ahgbcdef");
        let OpMessage::Insert { parent, side, .. } = &msg2 else {
            panic!();
        };
        assert_eq!(parent, &Parent::Element(g));
        assert_eq!(*side, Side::Left);
        r.tree().check_invariants().unwrap();
    }

    #[test]
    fn insert_into_empty_document_hangs_off_the_root() {
        let mut r = Replica::new(rid("a"), Variant::Fugue);
        let msg = r.insert(0, 'x').unwrap();
        let OpMessage::Insert { parent, side, .. } = &msg else {
            panic!();
        };
        assert_eq!(parent, &Parent::Root);
        assert_eq!(*side, Side::Right);
        assert_eq!(r.document(), "x");
    }

    #[test]
    fn sequential_typing_reads_back_in_order() {
        for variant in [Variant::Fugue, Variant::FugueMax] {
            let mut r = Replica::new(rid("a"), variant);
            for (i, ch) in "hello world".chars().enumerate() {
                r.insert(i, ch).unwrap();
            }
            assert_eq!(r.document(), "hello world");
            r.tree().check_invariants().unwrap();
        }
    }

    #[test]
    fn local_insert_lands_at_its_index() {
        let mut r = Replica::new(rid("a"), Variant::FugueMax);
        for ch in "abcd".chars() {
            let len = r.len();
            r.insert(len, ch).unwrap();
        }
        r.insert(2, 'X').unwrap();
        assert_eq!(r.document(), "abXcd");
        r.insert(0, 'Y').unwrap();
        assert_eq!(r.document(), "YabXcd");
        r.insert(6, 'Z').unwrap();
        assert_eq!(r.document(), "YabXcdZ");
    }

    #[test]
    fn delete_tombstones_the_indexed_element() {
        let mut r = abcdef_replica(Variant::Fugue);
        let msg = r.delete(2).unwrap();
        assert_eq!(msg, OpMessage::Delete { id: eid("w", 0) }, "targets 'c'");
        assert_eq!(r.document(), "abdef");
        // Deleting index 0 twice on a two-element doc empties it.
        let mut two = Replica::new(rid("a"), Variant::Fugue);
        two.insert(0, 'x').unwrap();
        two.insert(1, 'y').unwrap();
        two.delete(0).unwrap();
        two.delete(0).unwrap();
        assert_eq!(two.document(), "");
        assert_eq!(two.tree().element_count(), 2, "tombstones remain");
    }

    #[test]
    fn edits_after_deletions_use_visible_indices() {
        let mut r = Replica::new(rid("a"), Variant::Fugue);
        for (i, ch) in "abcdef".chars().enumerate() {
            r.insert(i, ch).unwrap();
        }
        r.delete(1).unwrap(); // "acdef"
        r.delete(1).unwrap(); // "adef"
        r.insert(1, 'X').unwrap();
        assert_eq!(r.document(), "aXdef");
        r.delete(3).unwrap();
        assert_eq!(r.document(), "aXdf");
        r.tree().check_invariants().unwrap();
    }

    #[test]
    fn out_of_bounds_edits_are_rejected_without_state_change() {
        let mut r = Replica::new(rid("a"), Variant::Fugue);
        r.insert(0, 'x').unwrap();
        assert_eq!(
            r.insert(2, 'y'),
            Err(EngineError::InsertIndexOutOfBounds { index: 2, len: 1 })
        );
        assert_eq!(
            r.delete(1),
            Err(EngineError::DeleteIndexOutOfBounds { index: 1, len: 1 })
        );
        assert_eq!(r.document(), "x");
        assert_eq!(r.ops_generated(), 1);
    }

    #[test]
    fn concurrent_right_children_sort_by_id_under_fugue() {
        // Two replicas each type at index 0 of an empty document, then
        // exchange messages. Converged order follows element ids.
        let mut a = Replica::new(rid("a"), Variant::Fugue);
        let mut b = Replica::new(rid("b"), Variant::Fugue);
        let ma = a.insert(0, 'A').unwrap();
        let mb = b.insert(0, 'B').unwrap();
        a.apply(&mb).unwrap();
        b.apply(&ma).unwrap();
        assert_eq!(a.document(), "AB");
        assert_eq!(b.document(), "AB");
        assert_eq!(a.tree(), b.tree());
    }

    #[test]
    fn sibling_rank_in_id_order_splices_between_existing_ids() {
        // Right siblings with ids (A,3) and (C,1); a new (B,7) goes between.
        let mut r = Replica::new(rid("reader"), Variant::Fugue);
        let p = eid("P", 0);
        r.apply(&insert_msg(p.clone(), 'p', Parent::Root, Side::Right, None))
            .unwrap();
        let under_p = |id: ElementId, v: char| {
            insert_msg(id, v, Parent::Element(p.clone()), Side::Right, None)
        };
        r.apply(&under_p(eid("A", 3), 'x')).unwrap();
        r.apply(&under_p(eid("C", 1), 'z')).unwrap();
        r.apply(&under_p(eid("B", 7), 'y')).unwrap();
        assert_eq!(
            r.tree()
                .children(&Parent::Element(p), Side::Right)
                .unwrap(),
            vec![eid("A", 3), eid("B", 7), eid("C", 1)]
        );
        assert_eq!(r.document(), "pxyz");
    }

    #[test]
    fn later_right_origins_sort_first_under_fuguemax() {
        // Top-level elements A, B, C (in id order). X is a right child of A
        // recorded with right origin C; Y likewise with right origin B.
        // B precedes C, so X (the later origin) must come first: "AXYBC" —
        // and the outcome must not depend on X/Y delivery order.
        let top = |id: ElementId, v: char| {
            insert_msg(id, v, Parent::Root, Side::Right, Some(RightOrigin::End))
        };
        let x = insert_msg(
            eid("1", 1),
            'X',
            Parent::Element(eid("1", 0)),
            Side::Right,
            Some(RightOrigin::Element(eid("3", 0))),
        );
        let y = insert_msg(
            eid("2", 1),
            'Y',
            Parent::Element(eid("1", 0)),
            Side::Right,
            Some(RightOrigin::Element(eid("2", 0))),
        );
        for (first, second) in [(&x, &y), (&y, &x)] {
            let mut r = Replica::new(rid("reader"), Variant::FugueMax);
            r.apply(&top(eid("1", 0), 'A')).unwrap();
            r.apply(&top(eid("2", 0), 'B')).unwrap();
            r.apply(&top(eid("3", 0), 'C')).unwrap();
            r.apply(first).unwrap();
            r.apply(second).unwrap();
            assert_eq!(r.document(), "AXYBC");
            r.tree().check_invariants().unwrap();
        }
    }

    #[test]
    fn end_sentinel_is_the_latest_right_origin() {
        // Existing siblings carry origins [C, B] (B before C in the list);
        // a new node with the end sentinel sorts before both.
        let top = |id: ElementId, v: char| {
            insert_msg(id, v, Parent::Root, Side::Right, Some(RightOrigin::End))
        };
        let mut r = Replica::new(rid("reader"), Variant::FugueMax);
        r.apply(&top(eid("1", 0), 'A')).unwrap();
        r.apply(&top(eid("2", 0), 'B')).unwrap();
        r.apply(&top(eid("3", 0), 'C')).unwrap();
        let under_a = |id: ElementId, v: char, ro: RightOrigin| {
            insert_msg(id, v, Parent::Element(eid("1", 0)), Side::Right, Some(ro))
        };
        r.apply(&under_a(eid("4", 0), 'x', RightOrigin::Element(eid("3", 0))))
            .unwrap();
        r.apply(&under_a(eid("5", 0), 'y', RightOrigin::Element(eid("2", 0))))
            .unwrap();
        r.apply(&under_a(eid("6", 0), 'z', RightOrigin::End)).unwrap();
        assert_eq!(r.document(), "AzxyBC");
    }

    #[test]
    fn equal_right_origins_fall_back_to_id_order() {
        let top = |id: ElementId, v: char| {
            insert_msg(id, v, Parent::Root, Side::Right, Some(RightOrigin::End))
        };
        let mut r = Replica::new(rid("reader"), Variant::FugueMax);
        r.apply(&top(eid("B", 0), 'b')).unwrap();
        // Both in id order and out of it.
        r.apply(&top(eid("A", 0), 'a')).unwrap();
        assert_eq!(r.document(), "ab");
    }

    #[test]
    fn variants_agree_on_sequential_histories() {
        let mut fugue = Replica::new(rid("a"), Variant::Fugue);
        let mut max = Replica::new(rid("a"), Variant::FugueMax);
        let edits: &[(bool, usize, char)] = &[
            (true, 0, 'h'),
            (true, 1, 'i'),
            (true, 1, 'e'),
            (false, 0, ' '),
            (true, 2, 'y'),
            (false, 1, ' '),
        ];
        for &(is_insert, idx, ch) in edits {
            if is_insert {
                fugue.insert(idx, ch).unwrap();
                max.insert(idx, ch).unwrap();
            } else {
                fugue.delete(idx).unwrap();
                max.delete(idx).unwrap();
            }
            assert_eq!(fugue.document(), max.document());
        }
        // The trees agree structurally except for right-origin tags.
        let strip = |r: &Replica| {
            r.state()
                .iter()
                .map(|e| (e.id.clone(), e.value, e.is_deleted))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&fugue), strip(&max));
    }

    #[test]
    fn causal_contract_violations_are_protocol_errors() {
        let mut r = Replica::new(rid("reader"), Variant::Fugue);
        let orphan = insert_msg(
            eid("a", 0),
            'x',
            Parent::Element(eid("ghost", 0)),
            Side::Right,
            None,
        );
        assert_eq!(
            r.apply(&orphan),
            Err(ProtocolError::MissingParent {
                id: eid("a", 0),
                parent: eid("ghost", 0)
            }
            .into())
        );
        assert_eq!(
            r.apply(&OpMessage::Delete { id: eid("a", 0) }),
            Err(ProtocolError::MissingDeleteTarget { id: eid("a", 0) }.into())
        );
        let ok = insert_msg(eid("a", 0), 'x', Parent::Root, Side::Right, None);
        r.apply(&ok).unwrap();
        assert_eq!(
            r.apply(&ok),
            Err(ProtocolError::DuplicateInsert { id: eid("a", 0) }.into())
        );
        // Wrong-variant annotations are rejected both ways.
        let tagged = insert_msg(
            eid("b", 0),
            'y',
            Parent::Root,
            Side::Right,
            Some(RightOrigin::End),
        );
        assert!(matches!(
            r.apply(&tagged),
            Err(EngineError::Protocol(ProtocolError::AnnotationMismatch {
                problem: "carries",
                ..
            }))
        ));
        let mut m = Replica::new(rid("reader"), Variant::FugueMax);
        let untagged = insert_msg(eid("b", 0), 'y', Parent::Root, Side::Right, None);
        assert!(matches!(
            m.apply(&untagged),
            Err(EngineError::Protocol(ProtocolError::AnnotationMismatch {
                problem: "lacks",
                ..
            }))
        ));
        // FugueMax insert whose recorded origin never arrived.
        m.apply(&insert_msg(
            eid("c", 0),
            'z',
            Parent::Root,
            Side::Right,
            Some(RightOrigin::End),
        ))
        .unwrap();
        let bad_ro = insert_msg(
            eid("d", 0),
            'w',
            Parent::Root,
            Side::Right,
            Some(RightOrigin::Element(eid("ghost", 1))),
        );
        assert_eq!(
            m.apply(&bad_ro),
            Err(ProtocolError::MissingRightOrigin {
                id: eid("d", 0),
                origin: eid("ghost", 1)
            }
            .into())
        );
        // Failed applies leave no partial state behind.
        m.tree().check_invariants().unwrap();
        assert_eq!(m.document(), "z");
    }

    #[test]
    fn deletes_are_idempotent_across_replicas() {
        let mut a = Replica::new(rid("a"), Variant::Fugue);
        let mut b = Replica::new(rid("b"), Variant::Fugue);
        let ins = a.insert(0, 'x').unwrap();
        b.apply(&ins).unwrap();
        let da = a.delete(0).unwrap();
        let db = b.delete(0).unwrap();
        assert_eq!(da, db, "both target the same element");
        a.apply(&db).unwrap();
        b.apply(&da).unwrap();
        assert_eq!(a.document(), "");
        assert_eq!(a.tree(), b.tree());
    }

    #[test]
    fn interleaved_local_and_remote_edits_stay_index_accurate() {
        // Local edits after a remote delivery must still land at the right
        // visible indices.
        let mut a = Replica::new(rid("a"), Variant::FugueMax);
        let mut b = Replica::new(rid("b"), Variant::FugueMax);
        let m1 = a.insert(0, 'a').unwrap();
        let m2 = a.insert(1, 'b').unwrap();
        b.apply(&m1).unwrap();
        b.apply(&m2).unwrap();
        let m3 = b.insert(1, 'X').unwrap();
        a.apply(&m3).unwrap();
        assert_eq!(a.document(), "aXb");
        let m4 = a.insert(2, 'Y').unwrap();
        assert_eq!(a.document(), "aXYb");
        b.apply(&m4).unwrap();
        assert_eq!(b.document(), "aXYb");
        assert_eq!(a.tree(), b.tree());
    }
}
