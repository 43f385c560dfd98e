//! The replicated-list tree: nodes, child order, and document traversal.
//!
//! A document is a tree of value-carrying nodes under a synthetic, valueless
//! root. Every node remembers which side of its parent it hangs from, and each
//! parent keeps *ordered* left-child and right-child lists. The document reads
//! out by depth-first in-order traversal:
//!
//! > left children (each with its whole subtree, in list order), then the
//! > node's own value, then right children (each with its subtree, in order).
//!
//! Deletion never removes a node; it blanks the value, leaving a *tombstone*
//! that keeps its place in the traversal. Tombstones are what make insertion
//! positions stable: concurrent edits can still anchor on a deleted element.
//!
//! Two traversal orders matter:
//!
//! * the **full** order (tombstones included) — the coordinate system used by
//!   the merge rules and the non-interleaving checks, and
//! * the **visible** order (tombstones skipped) — what users see; this is what
//!   [`Tree::values`] extracts and what insert/delete indices refer to.
//!
//! The full order of any two nodes never changes once both exist: inserting a
//! node splices exactly one new entry into the traversal and removes nothing
//! (prefix stability), and deleting only flips a visibility flag.
//!
//! Internally nodes live in a flat arena with linked sibling lists, so a node
//! costs a few dozen bytes and whole-document replays of hundreds of thousands
//! of ops stay cheap. The arena is an implementation detail: the public API
//! speaks [`ElementId`]s. Traversal is iterative (parent-pointer walking), so
//! arbitrarily deep trees cannot overflow the stack.
//!
//! Sequential typing degenerates the tree into a chain as deep as the
//! document, so position queries cannot afford to walk it. The arena
//! therefore carries a side index — a balanced search tree over the full
//! traversal order, with visible-node counts in every subtree — that answers
//! "which element is at visible index i" and "what follows this element in
//! the full traversal" in logarithmic time no matter how degenerate the
//! coordinate tree gets. It is pure acceleration: it stores no ordering
//! information of its own, and [`Tree::check_invariants`] verifies it against
//! the coordinate traversal node for node.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::id::{ElementId, Parent, ReplicaId, RightOrigin, Side};

/// Absent link / absent node.
const NIL: u32 = u32::MAX;
/// `right_origin` encoding: no recorded right origin.
const RO_NONE: u32 = u32::MAX;
/// `right_origin` encoding: the end-of-document sentinel.
const RO_END: u32 = u32::MAX - 1;
/// Arena index of the synthetic root.
const ROOT: u32 = 0;
/// Highest arena index that still leaves the sentinels unambiguous.
const MAX_NODES: usize = (u32::MAX - 2) as usize;

const FLAG_RIGHT: u8 = 0b01;
const FLAG_DELETED: u8 = 0b10;

/// Errors raised by structural tree operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    /// The id does not name any node in this tree.
    #[error("unknown element {0}")]
    UnknownId(ElementId),
    /// An attachment named a parent that is not present.
    #[error("unknown parent {0}")]
    UnknownParent(ElementId),
    /// An attachment carried a right origin that is not present.
    #[error("unknown right origin {0}")]
    UnknownRightOrigin(ElementId),
    /// The id is already present; element ids are never reused.
    #[error("duplicate element {0}")]
    DuplicateId(ElementId),
    /// Sibling position past the end of the sibling list.
    #[error("sibling position {position} out of range (list has {len} nodes)")]
    SiblingPositionOutOfRange { position: usize, len: usize },
    /// The root anchors the document start; nothing may precede it.
    #[error("the root cannot take left children")]
    RootLeftChild,
    /// A visible index past the end of the visible sequence.
    #[error("visible index {index} out of bounds (visible length {len})")]
    IndexOutOfBounds { index: usize, len: usize },
    /// Arena capacity or counter width exceeded.
    #[error("tree capacity exceeded at {0}")]
    CapacityExceeded(ElementId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct NodeData {
    /// Index into the replica-name table; `NIL` for the root.
    replica: u32,
    counter: u32,
    /// Arena index of the parent; `NIL` for the root.
    parent: u32,
    /// Next node in the same sibling list (same parent, same side).
    next_sibling: u32,
    /// Head of the ordered left-child list.
    first_left: u32,
    /// Head of the ordered right-child list.
    first_right: u32,
    /// Recorded right origin: arena index, `RO_END`, or `RO_NONE`.
    right_origin: u32,
    value: char,
    flags: u8,
}

impl NodeData {
    fn side(&self) -> Side {
        if self.flags & FLAG_RIGHT != 0 {
            Side::Right
        } else {
            Side::Left
        }
    }

    fn is_deleted(&self) -> bool {
        self.flags & FLAG_DELETED != 0
    }
}

/// The order-statistic side index: a treap over the full traversal order.
///
/// One treap node per element (the synthetic root is not represented),
/// stored in parallel arrays indexed by arena slot. The treap's in-order
/// sequence *is* the full traversal; each subtree counts its visible
/// (non-tombstone) members, so the k-th visible element and any node's
/// traversal successor cost one root-to-node path. Heap priorities are
/// hashed from the arena index, which keeps the expected depth logarithmic
/// and the structure fully deterministic.
///
/// Elements are only ever inserted (relative to a traversal neighbor) and
/// marked invisible — never removed — mirroring tombstone semantics.
#[derive(Debug, Clone, Default)]
struct OrderIndex {
    up: Vec<u32>,
    left: Vec<u32>,
    right: Vec<u32>,
    /// Visible elements in the subtree rooted here (including this node).
    vis: Vec<u32>,
    prio: Vec<u32>,
    /// Treap root; `NIL` while the document is empty.
    top: u32,
}

impl OrderIndex {
    fn new() -> Self {
        // Slot 0 mirrors the arena's root sentinel and stays unused.
        OrderIndex {
            up: vec![NIL],
            left: vec![NIL],
            right: vec![NIL],
            vis: vec![0],
            prio: vec![0],
            top: NIL,
        }
    }

    /// Reserves the slot for a freshly pushed arena node.
    fn push_slot(&mut self) {
        self.up.push(NIL);
        self.left.push(NIL);
        self.right.push(NIL);
        self.vis.push(0);
        // SplitMix64: sequential arena indices hash to independent
        // priorities, so append-heavy workloads still balance.
        let mut z = (self.prio.len() as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        self.prio.push((z ^ (z >> 31)) as u32);
    }

    fn vis_of(&self, n: u32) -> u32 {
        if n == NIL {
            0
        } else {
            self.vis[n as usize]
        }
    }

    /// Whether node `n` itself is visible, recovered from the counts.
    fn own_vis(&self, n: u32) -> u32 {
        self.vis[n as usize] - self.vis_of(self.left[n as usize]) - self.vis_of(self.right[n as usize])
    }

    fn leftmost(&self, mut n: u32) -> u32 {
        while self.left[n as usize] != NIL {
            n = self.left[n as usize];
        }
        n
    }

    fn rightmost(&self, mut n: u32) -> u32 {
        while self.right[n as usize] != NIL {
            n = self.right[n as usize];
        }
        n
    }

    /// First element of the full traversal.
    fn first(&self) -> Option<u32> {
        if self.top == NIL {
            None
        } else {
            Some(self.leftmost(self.top))
        }
    }

    /// The element directly after `x` in the full traversal.
    fn successor(&self, x: u32) -> Option<u32> {
        if self.right[x as usize] != NIL {
            return Some(self.leftmost(self.right[x as usize]));
        }
        let mut n = x;
        let mut p = self.up[n as usize];
        while p != NIL && self.right[p as usize] == n {
            n = p;
            p = self.up[n as usize];
        }
        if p == NIL {
            None
        } else {
            Some(p)
        }
    }

    /// Splices `x` in directly after `pred` (`None` = document start).
    fn insert_after(&mut self, pred: Option<u32>, x: u32) {
        let (parent, as_left) = match pred {
            None => {
                if self.top == NIL {
                    self.top = x;
                    self.vis[x as usize] = 1;
                    return;
                }
                (self.leftmost(self.top), true)
            }
            Some(p) => {
                if self.right[p as usize] == NIL {
                    (p, false)
                } else {
                    (self.leftmost(self.right[p as usize]), true)
                }
            }
        };
        self.attach_leaf(parent, as_left, x);
    }

    /// Splices `x` in directly before `succ` (which must be present).
    fn insert_before(&mut self, succ: u32, x: u32) {
        let (parent, as_left) = if self.left[succ as usize] == NIL {
            (succ, true)
        } else {
            (self.rightmost(self.left[succ as usize]), false)
        };
        self.attach_leaf(parent, as_left, x);
    }

    /// Hangs the fresh, visible leaf `x` under `parent`, updates counts on
    /// the path to the root, and rotates `x` up into heap order.
    fn attach_leaf(&mut self, parent: u32, as_left: bool, x: u32) {
        self.up[x as usize] = parent;
        if as_left {
            self.left[parent as usize] = x;
        } else {
            self.right[parent as usize] = x;
        }
        self.vis[x as usize] = 1;
        let mut a = parent;
        while a != NIL {
            self.vis[a as usize] += 1;
            a = self.up[a as usize];
        }
        while self.up[x as usize] != NIL && self.prio[x as usize] > self.prio[self.up[x as usize] as usize] {
            self.rotate_up(x);
        }
    }

    /// One rotation moving `x` above its parent, preserving in-order and
    /// subtree counts.
    fn rotate_up(&mut self, x: u32) {
        let p = self.up[x as usize];
        let g = self.up[p as usize];
        let own_p = self.own_vis(p);
        let own_x = self.own_vis(x);

        if self.left[p as usize] == x {
            let moved = self.right[x as usize];
            self.left[p as usize] = moved;
            if moved != NIL {
                self.up[moved as usize] = p;
            }
            self.right[x as usize] = p;
        } else {
            let moved = self.left[x as usize];
            self.right[p as usize] = moved;
            if moved != NIL {
                self.up[moved as usize] = p;
            }
            self.left[x as usize] = p;
        }
        self.up[p as usize] = x;
        self.up[x as usize] = g;
        if g == NIL {
            self.top = x;
        } else if self.left[g as usize] == p {
            self.left[g as usize] = x;
        } else {
            self.right[g as usize] = x;
        }
        self.vis[p as usize] =
            self.vis_of(self.left[p as usize]) + self.vis_of(self.right[p as usize]) + own_p;
        self.vis[x as usize] =
            self.vis_of(self.left[x as usize]) + self.vis_of(self.right[x as usize]) + own_x;
    }

    /// Records that `x` became a tombstone.
    fn mark_invisible(&mut self, x: u32) {
        let mut a = x;
        while a != NIL {
            self.vis[a as usize] -= 1;
            a = self.up[a as usize];
        }
    }

    /// The element at visible index `k`, if any.
    fn kth_visible(&self, k: usize) -> Option<u32> {
        if k >= self.vis_of(self.top) as usize {
            return None;
        }
        let mut k = k as u32;
        let mut n = self.top;
        loop {
            let in_left = self.vis_of(self.left[n as usize]);
            if k < in_left {
                n = self.left[n as usize];
                continue;
            }
            k -= in_left;
            if self.own_vis(n) == 1 {
                if k == 0 {
                    return Some(n);
                }
                k -= 1;
            }
            n = self.right[n as usize];
        }
    }
}

/// One entry of a traversal: an element, its value, and whether it is a
/// tombstone. Entries for visible-only traversals always have
/// `is_deleted == false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversalEntry {
    pub id: ElementId,
    pub value: char,
    pub is_deleted: bool,
}

/// A read-only view of one node's metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeView {
    pub id: ElementId,
    pub value: char,
    pub is_deleted: bool,
    pub parent: Parent,
    pub side: Side,
    /// Present only when the originating merge rule records right origins
    /// (right children created under FugueMax).
    pub right_origin: Option<RightOrigin>,
}

/// The document tree. See the module docs for the model.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<NodeData>,
    /// Interned replica names; `NodeData::replica` indexes this table.
    names: Vec<ReplicaId>,
    name_lookup: HashMap<ReplicaId, u32>,
    /// Per interned replica: counter -> arena index (`NIL` for absent
    /// counters). Dense in practice, since replicas count 0, 1, 2, ...
    by_counter: Vec<Vec<u32>>,
    /// Order-statistic view of the full traversal (see [`OrderIndex`]).
    order: OrderIndex,
    visible: usize,
}

impl Default for Tree {
    fn default() -> Self {
        Self::new()
    }
}

impl Tree {
    /// An empty document: just the root.
    pub fn new() -> Self {
        Tree {
            nodes: vec![NodeData {
                replica: NIL,
                counter: 0,
                parent: NIL,
                next_sibling: NIL,
                first_left: NIL,
                first_right: NIL,
                right_origin: RO_NONE,
                value: '\0',
                flags: 0,
            }],
            names: Vec::new(),
            name_lookup: HashMap::new(),
            by_counter: Vec::new(),
            order: OrderIndex::new(),
            visible: 0,
        }
    }

    /// Number of elements (tombstones included, root excluded).
    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of visible (non-tombstone) elements.
    pub fn visible_count(&self) -> usize {
        self.visible
    }

    /// Whether the element is present (visible or tombstoned).
    pub fn contains(&self, id: &ElementId) -> bool {
        self.idx_of(id).is_some()
    }

    /// Metadata of one node, if present.
    pub fn node(&self, id: &ElementId) -> Option<NodeView> {
        let idx = self.idx_of(id)?;
        let nd = &self.nodes[idx as usize];
        Some(NodeView {
            id: id.clone(),
            value: nd.value,
            is_deleted: nd.is_deleted(),
            parent: self.parent_ref(idx),
            side: nd.side(),
            right_origin: self.right_origin_ref(idx),
        })
    }

    /// The ordered child list of `parent` on `side`.
    pub fn children(&self, parent: &Parent, side: Side) -> Result<Vec<ElementId>, TreeError> {
        let p = self.parent_idx(parent)?;
        let mut out = Vec::new();
        let mut c = self.child_head(p, side);
        while c != NIL {
            out.push(self.element_id(c));
            c = self.nodes[c as usize].next_sibling;
        }
        Ok(out)
    }

    /// Whether `parent` has any child on `side` (tombstones count).
    pub fn has_children(&self, parent: &Parent, side: Side) -> Result<bool, TreeError> {
        let p = self.parent_idx(parent)?;
        Ok(self.child_head(p, side) != NIL)
    }

    /// Splices a new node into its parent's `side` child list at `position`.
    ///
    /// The caller decides the position (that is the merge rule's job); the
    /// tree only enforces structure: the id must be fresh and its counter
    /// contiguous for its replica, the parent and any right origin must
    /// already be present, and the root takes no left children.
    pub fn attach(
        &mut self,
        id: ElementId,
        value: char,
        parent: Parent,
        side: Side,
        right_origin: Option<RightOrigin>,
        position: usize,
    ) -> Result<(), TreeError> {
        // Validate everything first; mutate only once nothing can fail.
        let parent_idx = match &parent {
            Parent::Root => ROOT,
            Parent::Element(pid) => self
                .idx_of(pid)
                .ok_or_else(|| TreeError::UnknownParent(pid.clone()))?,
        };
        if parent_idx == ROOT && side == Side::Left {
            return Err(TreeError::RootLeftChild);
        }
        let ro = match &right_origin {
            None => RO_NONE,
            Some(RightOrigin::End) => RO_END,
            Some(RightOrigin::Element(rid)) => self
                .idx_of(rid)
                .ok_or_else(|| TreeError::UnknownRightOrigin(rid.clone()))?,
        };
        if self.idx_of(&id).is_some() {
            return Err(TreeError::DuplicateId(id.clone()));
        }
        if self.nodes.len() >= MAX_NODES || id.counter > u32::MAX as u64 {
            return Err(TreeError::CapacityExceeded(id.clone()));
        }
        let siblings = self.sibling_list_len(parent_idx, side);
        if position > siblings {
            return Err(TreeError::SiblingPositionOutOfRange {
                position,
                len: siblings,
            });
        }

        let rep = self.intern(&id.replica);
        let new_idx = self.nodes.len() as u32;
        self.nodes.push(NodeData {
            replica: rep,
            counter: id.counter as u32,
            parent: parent_idx,
            next_sibling: NIL,
            first_left: NIL,
            first_right: NIL,
            right_origin: ro,
            value,
            flags: if side == Side::Right { FLAG_RIGHT } else { 0 },
        });
        self.order.push_slot();
        let prev_sibling = self.link_at(parent_idx, side, new_idx, position);
        self.index_fresh_leaf(new_idx, parent_idx, side, prev_sibling);
        self.record_counter(rep, id.counter as usize, new_idx);
        self.visible += 1;
        Ok(())
    }

    /// Registers a just-linked leaf with the order index by locating its
    /// full-traversal neighbor from its coordinates.
    fn index_fresh_leaf(&mut self, new_idx: u32, parent: u32, side: Side, prev_sibling: Option<u32>) {
        if let Some(ps) = prev_sibling {
            // Any later sibling comes right after the previous sibling's
            // whole subtree, on either side.
            let pred = self.subtree_last(ps);
            self.order.insert_after(Some(pred), new_idx);
            return;
        }
        match side {
            // The first right child follows its parent's own value — or
            // starts the document when the parent is the root.
            Side::Right if parent == ROOT => self.order.insert_after(None, new_idx),
            Side::Right => self.order.insert_after(Some(parent), new_idx),
            // A new head of the left list precedes what used to open the
            // parent's block: the next left sibling's subtree, or the
            // parent itself. (The root takes no left children.)
            Side::Left => {
                let ns = self.nodes[new_idx as usize].next_sibling;
                let succ = if ns != NIL { self.subtree_first(ns) } else { parent };
                self.order.insert_before(succ, new_idx);
            }
        }
    }

    /// Turns an element into a tombstone. Returns `false` if it already was
    /// one (the operation is idempotent), `Err` if the element is unknown.
    pub fn mark_deleted(&mut self, id: &ElementId) -> Result<bool, TreeError> {
        let idx = self
            .idx_of(id)
            .ok_or_else(|| TreeError::UnknownId(id.clone()))?;
        let nd = &mut self.nodes[idx as usize];
        if nd.is_deleted() {
            return Ok(false);
        }
        nd.flags |= FLAG_DELETED;
        self.order.mark_invisible(idx);
        self.visible -= 1;
        Ok(true)
    }

    /// Depth-first in-order traversal.
    ///
    /// With `include_tombstones` the result is the full coordinate order;
    /// without, it is exactly the visible sequence behind [`Tree::values`].
    pub fn traverse(&self, include_tombstones: bool) -> Vec<TraversalEntry> {
        let mut out = Vec::with_capacity(if include_tombstones {
            self.element_count()
        } else {
            self.visible
        });
        for idx in self.iter_idx() {
            let nd = &self.nodes[idx as usize];
            if nd.is_deleted() && !include_tombstones {
                continue;
            }
            out.push(TraversalEntry {
                id: self.element_id(idx),
                value: nd.value,
                is_deleted: nd.is_deleted(),
            });
        }
        out
    }

    /// The visible value sequence as a string.
    pub fn values(&self) -> String {
        let mut out = String::with_capacity(self.visible);
        for idx in self.iter_idx() {
            let nd = &self.nodes[idx as usize];
            if !nd.is_deleted() {
                out.push(nd.value);
            }
        }
        out
    }

    /// The element currently at `index` in the visible sequence.
    pub fn node_at_visible_index(&self, index: usize) -> Result<ElementId, TreeError> {
        match self.order.kth_visible(index) {
            Some(idx) => Ok(self.element_id(idx)),
            None => Err(TreeError::IndexOutOfBounds {
                index,
                len: self.visible,
            }),
        }
    }

    /// The node directly after `after` in the full (tombstone-inclusive)
    /// traversal, or [`RightOrigin::End`] past the last node. `Parent::Root`
    /// asks for the first node of the document.
    pub fn next_in_full_traversal(&self, after: &Parent) -> Result<RightOrigin, TreeError> {
        // Answered from the order index: the coordinate tree can be as deep
        // as the document, but the balanced view keeps this logarithmic.
        let next = match after {
            Parent::Root => self.order.first(),
            Parent::Element(id) => {
                let idx = self
                    .idx_of(id)
                    .ok_or_else(|| TreeError::UnknownId(id.clone()))?;
                self.order.successor(idx)
            }
        };
        Ok(match next {
            Some(idx) => RightOrigin::Element(self.element_id(idx)),
            None => RightOrigin::End,
        })
    }

    // ------------------------------------------------------------------
    // Internal arena plumbing. Everything below speaks arena indices; the
    // engine reaches these through pub(crate) accessors so its hot path can
    // skip id round-trips.
    // ------------------------------------------------------------------

    pub(crate) fn idx_of(&self, id: &ElementId) -> Option<u32> {
        let rep = *self.name_lookup.get(&id.replica)?;
        let slots = &self.by_counter[rep as usize];
        let idx = *slots.get(usize::try_from(id.counter).ok()?)?;
        if idx == NIL {
            None
        } else {
            Some(idx)
        }
    }

    pub(crate) fn element_id(&self, idx: u32) -> ElementId {
        let nd = &self.nodes[idx as usize];
        debug_assert_ne!(idx, ROOT, "the root has no element id");
        ElementId::new(self.names[nd.replica as usize].clone(), nd.counter as u64)
    }

    pub(crate) fn parent_ref(&self, idx: u32) -> Parent {
        let p = self.nodes[idx as usize].parent;
        if p == ROOT {
            Parent::Root
        } else {
            Parent::Element(self.element_id(p))
        }
    }

    fn right_origin_ref(&self, idx: u32) -> Option<RightOrigin> {
        match self.nodes[idx as usize].right_origin {
            RO_NONE => None,
            RO_END => Some(RightOrigin::End),
            n => Some(RightOrigin::Element(self.element_id(n))),
        }
    }

    /// Interns a replica name, growing the counter table alongside.
    fn intern(&mut self, replica: &ReplicaId) -> u32 {
        if let Some(&i) = self.name_lookup.get(replica) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(replica.clone());
        self.name_lookup.insert(replica.clone(), i);
        self.by_counter.push(Vec::new());
        i
    }

    /// Stores `counter -> idx` in the per-replica table, growing it with
    /// empty slots as needed. The slot must be free (callers check).
    fn record_counter(&mut self, rep: u32, counter: usize, idx: u32) {
        let slots = &mut self.by_counter[rep as usize];
        if counter >= slots.len() {
            slots.resize(counter + 1, NIL);
        }
        debug_assert_eq!(slots[counter], NIL, "callers reject duplicate ids");
        slots[counter] = idx;
    }

    fn parent_idx(&self, parent: &Parent) -> Result<u32, TreeError> {
        match parent {
            Parent::Root => Ok(ROOT),
            Parent::Element(id) => self
                .idx_of(id)
                .ok_or_else(|| TreeError::UnknownParent(id.clone())),
        }
    }

    fn child_head(&self, parent: u32, side: Side) -> u32 {
        let nd = &self.nodes[parent as usize];
        match side {
            Side::Left => nd.first_left,
            Side::Right => nd.first_right,
        }
    }

    fn set_child_head(&mut self, parent: u32, side: Side, head: u32) {
        let nd = &mut self.nodes[parent as usize];
        match side {
            Side::Left => nd.first_left = head,
            Side::Right => nd.first_right = head,
        }
    }

    fn sibling_list_len(&self, parent: u32, side: Side) -> usize {
        let mut len = 0usize;
        let mut c = self.child_head(parent, side);
        while c != NIL {
            len += 1;
            c = self.nodes[c as usize].next_sibling;
        }
        len
    }

    /// Links `new_idx` as the `position`-th child of `parent` on `side` and
    /// returns the sibling now directly before it, if any. The position must
    /// already be validated against the list length.
    fn link_at(&mut self, parent: u32, side: Side, new_idx: u32, position: usize) -> Option<u32> {
        if position == 0 {
            let old = self.child_head(parent, side);
            self.nodes[new_idx as usize].next_sibling = old;
            self.set_child_head(parent, side, new_idx);
            return None;
        }
        let mut prev = self.child_head(parent, side);
        for _ in 1..position {
            prev = self.nodes[prev as usize].next_sibling;
        }
        debug_assert_ne!(prev, NIL, "position validated by the caller");
        let after = self.nodes[prev as usize].next_sibling;
        self.nodes[new_idx as usize].next_sibling = after;
        self.nodes[prev as usize].next_sibling = new_idx;
        Some(prev)
    }

    /// First node of `idx`'s subtree in in-order: descend leftmost children.
    fn subtree_first(&self, mut idx: u32) -> u32 {
        while self.nodes[idx as usize].first_left != NIL {
            idx = self.nodes[idx as usize].first_left;
        }
        idx
    }

    /// Last node of `idx`'s subtree in in-order: descend into the final
    /// right child while one exists.
    fn subtree_last(&self, mut idx: u32) -> u32 {
        loop {
            let mut c = self.nodes[idx as usize].first_right;
            if c == NIL {
                return idx;
            }
            while self.nodes[c as usize].next_sibling != NIL {
                c = self.nodes[c as usize].next_sibling;
            }
            idx = c;
        }
    }

    /// Arena slot of the `k`-th visible element, from the order index.
    pub(crate) fn kth_visible_idx(&self, k: usize) -> Option<u32> {
        self.order.kth_visible(k)
    }

    /// First slot of the full traversal, from the order index.
    pub(crate) fn order_first(&self) -> Option<u32> {
        self.order.first()
    }

    /// Slot directly after `idx` in the full traversal, from the order
    /// index. Unlike [`Tree::successor`] this stays logarithmic even when
    /// the coordinate tree degenerates into a chain (sequential typing).
    pub(crate) fn order_successor(&self, idx: u32) -> Option<u32> {
        self.order.successor(idx)
    }

    /// First node of the whole traversal, by coordinate walk. Kept separate
    /// from the order index so invariant checks can compare the two.
    pub(crate) fn first_idx(&self) -> Option<u32> {
        let head = self.nodes[ROOT as usize].first_right;
        if head == NIL {
            None
        } else {
            Some(self.subtree_first(head))
        }
    }

    /// In-order successor of a node, by coordinate walk (amortized O(1)
    /// across a full scan, O(depth) as a point query).
    pub(crate) fn successor(&self, idx: u32) -> Option<u32> {
        let nd = &self.nodes[idx as usize];
        if nd.first_right != NIL {
            return Some(self.subtree_first(nd.first_right));
        }
        let mut c = idx;
        loop {
            if c == ROOT {
                return None;
            }
            let nd = &self.nodes[c as usize];
            if nd.next_sibling != NIL {
                return Some(self.subtree_first(nd.next_sibling));
            }
            if nd.side() == Side::Left {
                // After the last left child comes the parent's own value.
                return Some(nd.parent);
            }
            // Last right child: the parent's subtree is finished too.
            c = nd.parent;
        }
    }

    /// Full-traversal iterator over arena indices.
    pub(crate) fn iter_idx(&self) -> TreeIdxIter<'_> {
        TreeIdxIter {
            tree: self,
            next: self.first_idx(),
        }
    }

    /// Head of a child list; `parent = None` addresses the root.
    pub(crate) fn child_head_raw(&self, parent: Option<u32>, side: Side) -> Option<u32> {
        let c = self.child_head(parent.unwrap_or(ROOT), side);
        if c == NIL {
            None
        } else {
            Some(c)
        }
    }

    /// Resolves a parent reference to an arena slot (`None` = root).
    pub(crate) fn resolve_parent(&self, parent: &Parent) -> Option<Option<u32>> {
        match parent {
            Parent::Root => Some(None),
            Parent::Element(id) => self.idx_of(id).map(Some),
        }
    }

    pub(crate) fn next_sibling_raw(&self, idx: u32) -> Option<u32> {
        let n = self.nodes[idx as usize].next_sibling;
        if n == NIL {
            None
        } else {
            Some(n)
        }
    }

    /// Raw right-origin: `None` untagged, `Some(None)` end, `Some(Some(i))`
    /// an element.
    pub(crate) fn right_origin_raw(&self, idx: u32) -> Option<Option<u32>> {
        match self.nodes[idx as usize].right_origin {
            RO_NONE => None,
            RO_END => Some(None),
            n => Some(Some(n)),
        }
    }

    pub(crate) fn id_parts_at(&self, idx: u32) -> (&ReplicaId, u64) {
        let nd = &self.nodes[idx as usize];
        (&self.names[nd.replica as usize], nd.counter as u64)
    }

    /// Exhaustive structural self-check, for tests and debugging. Verifies
    /// arena links, sibling-list membership, counter tables, visibility
    /// counts, and that the traversal reaches every node exactly once.
    pub fn check_invariants(&self) -> Result<(), String> {
        let root = &self.nodes[ROOT as usize];
        if root.first_left != NIL {
            return Err("root has a left child".into());
        }
        if root.parent != NIL || root.replica != NIL {
            return Err("root metadata corrupted".into());
        }

        let n = self.nodes.len();
        let mut linked = vec![false; n];
        linked[ROOT as usize] = true;
        for (pi, nd) in self.nodes.iter().enumerate() {
            for side in [Side::Left, Side::Right] {
                let mut c = match side {
                    Side::Left => nd.first_left,
                    Side::Right => nd.first_right,
                };
                let mut steps = 0usize;
                while c != NIL {
                    steps += 1;
                    if steps > n {
                        return Err(format!("sibling cycle under node {pi}"));
                    }
                    let cd = &self.nodes[c as usize];
                    if cd.parent != pi as u32 {
                        return Err(format!("node {c} linked under wrong parent {pi}"));
                    }
                    if cd.side() != side {
                        return Err(format!("node {c} linked on wrong side of {pi}"));
                    }
                    if linked[c as usize] {
                        return Err(format!("node {c} linked twice"));
                    }
                    linked[c as usize] = true;
                    c = cd.next_sibling;
                }
            }
        }
        if let Some(missing) = linked.iter().position(|l| !l) {
            return Err(format!("node {missing} not linked under its parent"));
        }

        let mut counted = 0usize;
        for (rep, slots) in self.by_counter.iter().enumerate() {
            for (c, &idx) in slots.iter().enumerate() {
                if idx == NIL {
                    continue;
                }
                let nd = &self.nodes[idx as usize];
                if nd.replica != rep as u32 || nd.counter != c as u32 {
                    return Err(format!("counter table mismatch at replica {rep}:{c}"));
                }
                counted += 1;
            }
        }
        if counted != self.element_count() {
            return Err("counter table does not cover every node".into());
        }

        let mut visited = 0usize;
        let mut visible = 0usize;
        for idx in self.iter_idx() {
            visited += 1;
            if visited > self.element_count() {
                return Err("traversal visits more nodes than exist".into());
            }
            let nd = &self.nodes[idx as usize];
            if !nd.is_deleted() {
                visible += 1;
            }
            if nd.right_origin != RO_NONE && nd.side() != Side::Right {
                return Err(format!("left child {idx} carries a right origin"));
            }
        }
        if visited != self.element_count() {
            return Err(format!(
                "traversal visited {visited} of {} nodes",
                self.element_count()
            ));
        }
        if visible != self.visible {
            return Err(format!(
                "visible count {} does not match traversal ({visible})",
                self.visible
            ));
        }

        // The order index must mirror the coordinate traversal exactly:
        // same slot count, symmetric links, correct visible counts, and the
        // same node sequence.
        let o = &self.order;
        if o.up.len() != n {
            return Err("order index size does not match the arena".into());
        }
        if o.vis_of(o.top) as usize != self.visible {
            return Err("order index visible total is wrong".into());
        }
        for i in 1..n as u32 {
            let (l, r, u) = (o.left[i as usize], o.right[i as usize], o.up[i as usize]);
            if l != NIL && o.up[l as usize] != i {
                return Err(format!("order index left link of {i} is asymmetric"));
            }
            if r != NIL && o.up[r as usize] != i {
                return Err(format!("order index right link of {i} is asymmetric"));
            }
            if u == NIL && o.top != i {
                return Err(format!("order index node {i} is orphaned"));
            }
            let own = if self.nodes[i as usize].is_deleted() { 0 } else { 1 };
            if o.vis[i as usize] != o.vis_of(l) + o.vis_of(r) + own {
                return Err(format!("order index count at {i} is wrong"));
            }
        }
        let mut cursor = o.first();
        for idx in self.iter_idx() {
            match cursor {
                Some(t) if t == idx => cursor = o.successor(t),
                _ => {
                    return Err(format!(
                        "order index disagrees with the traversal at node {idx}"
                    ))
                }
            }
        }
        if cursor.is_some() {
            return Err("order index carries nodes past the traversal end".into());
        }
        Ok(())
    }
}

/// Trees are equal when their full traversals agree on every node's id,
/// value, tombstone flag, parent, side, and recorded right origin — i.e. when
/// they are the same document, regardless of arrival order or arena layout.
impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        if self.element_count() != other.element_count() || self.visible != other.visible {
            return false;
        }
        let mut ia = self.iter_idx();
        let mut ib = other.iter_idx();
        loop {
            match (ia.next(), ib.next()) {
                (None, None) => return true,
                (Some(a), Some(b)) => {
                    let na = &self.nodes[a as usize];
                    let nb = &other.nodes[b as usize];
                    if na.counter != nb.counter
                        || na.value != nb.value
                        || na.flags != nb.flags
                        || self.names[na.replica as usize] != other.names[nb.replica as usize]
                    {
                        return false;
                    }
                    let pa = na.parent;
                    let pb = nb.parent;
                    match (pa == ROOT, pb == ROOT) {
                        (true, true) => {}
                        (false, false) => {
                            if self.id_parts_at(pa).1 != other.id_parts_at(pb).1
                                || self.id_parts_at(pa).0 != other.id_parts_at(pb).0
                            {
                                return false;
                            }
                        }
                        _ => return false,
                    }
                    match (na.right_origin, nb.right_origin) {
                        (RO_NONE, RO_NONE) | (RO_END, RO_END) => {}
                        (ra, rb) if ra != RO_NONE && ra != RO_END && rb != RO_NONE && rb != RO_END => {
                            if self.id_parts_at(ra).1 != other.id_parts_at(rb).1
                                || self.id_parts_at(ra).0 != other.id_parts_at(rb).0
                            {
                                return false;
                            }
                        }
                        _ => return false,
                    }
                }
                _ => return false,
            }
        }
    }
}

impl Eq for Tree {}

impl fmt::Display for Tree {
    /// The visible document text.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.values())
    }
}

pub(crate) struct TreeIdxIter<'a> {
    tree: &'a Tree,
    next: Option<u32>,
}

impl Iterator for TreeIdxIter<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        let cur = self.next?;
        self.next = self.tree.successor(cur);
        Some(cur)
    }
}

/// Two-pass tree reconstruction for the document codec.
///
/// Saved documents list nodes in traversal order, where left children appear
/// *before* their parent, so direct [`Tree::attach`] calls would dangle. The
/// builder first declares every node, then links them in file order (which
/// preserves sibling order, because siblings of one parent/side appear in
/// list order within the traversal), then validates the result as a whole.
pub(crate) struct TreeBuilder {
    tree: Tree,
    /// Last linked child per (parent arena index, side), for tail appends.
    tails: HashMap<(u32, bool), u32>,
    /// Most recently linked node: file order is traversal order, so each
    /// link appends here in the order index.
    last_linked: u32,
    declared: usize,
    linked: usize,
}

impl TreeBuilder {
    pub(crate) fn new() -> Self {
        TreeBuilder {
            tree: Tree::new(),
            tails: HashMap::new(),
            last_linked: NIL,
            declared: 0,
            linked: 0,
        }
    }

    /// Pass 1: create the node slot.
    pub(crate) fn declare(
        &mut self,
        id: &ElementId,
        value: char,
        deleted: bool,
    ) -> Result<(), TreeError> {
        if self.tree.nodes.len() >= MAX_NODES || id.counter > u32::MAX as u64 {
            return Err(TreeError::CapacityExceeded(id.clone()));
        }
        if self.tree.idx_of(id).is_some() {
            return Err(TreeError::DuplicateId(id.clone()));
        }
        let rep = self.tree.intern(&id.replica);
        let idx = self.tree.nodes.len() as u32;
        self.tree.record_counter(rep, id.counter as usize, idx);
        self.tree.nodes.push(NodeData {
            replica: rep,
            counter: id.counter as u32,
            parent: NIL,
            next_sibling: NIL,
            first_left: NIL,
            first_right: NIL,
            right_origin: RO_NONE,
            value,
            flags: if deleted { FLAG_DELETED } else { 0 },
        });
        self.tree.order.push_slot();
        if !deleted {
            self.tree.visible += 1;
        }
        self.declared += 1;
        Ok(())
    }

    /// Pass 2, in traversal order: append the node to its parent's child
    /// list. Appending in traversal order reproduces sibling order exactly.
    pub(crate) fn link(
        &mut self,
        id: &ElementId,
        parent: &Parent,
        side: Side,
    ) -> Result<(), TreeError> {
        let idx = self
            .tree
            .idx_of(id)
            .ok_or_else(|| TreeError::UnknownId(id.clone()))?;
        let parent_idx = self.tree.parent_idx(parent)?;
        if parent_idx == ROOT && side == Side::Left {
            return Err(TreeError::RootLeftChild);
        }
        if self.tree.nodes[idx as usize].parent != NIL {
            return Err(TreeError::DuplicateId(id.clone()));
        }
        self.tree.nodes[idx as usize].parent = parent_idx;
        if side == Side::Right {
            self.tree.nodes[idx as usize].flags |= FLAG_RIGHT;
        }
        let key = (parent_idx, side == Side::Right);
        match self.tails.insert(key, idx) {
            None => self.tree.set_child_head(parent_idx, side, idx),
            Some(tail) => self.tree.nodes[tail as usize].next_sibling = idx,
        }
        // Append to the order index. Files that break traversal-order
        // nesting produce an index that disagrees with the coordinate
        // walk, which `finish` rejects.
        let pred = if self.last_linked == NIL {
            None
        } else {
            Some(self.last_linked)
        };
        self.tree.order.insert_after(pred, idx);
        if self.tree.nodes[idx as usize].is_deleted() {
            self.tree.order.mark_invisible(idx);
        }
        self.last_linked = idx;
        self.linked += 1;
        Ok(())
    }

    pub(crate) fn set_right_origin(
        &mut self,
        id: &ElementId,
        origin: &RightOrigin,
    ) -> Result<(), TreeError> {
        let idx = self
            .tree
            .idx_of(id)
            .ok_or_else(|| TreeError::UnknownId(id.clone()))?;
        let ro = match origin {
            RightOrigin::End => RO_END,
            RightOrigin::Element(rid) => self
                .tree
                .idx_of(rid)
                .ok_or_else(|| TreeError::UnknownRightOrigin(rid.clone()))?,
        };
        self.tree.nodes[idx as usize].right_origin = ro;
        Ok(())
    }

    /// Validates and returns the finished tree.
    pub(crate) fn finish(self) -> Result<Tree, String> {
        if self.declared != self.linked {
            return Err(format!(
                "{} nodes declared but {} linked",
                self.declared, self.linked
            ));
        }
        self.tree.check_invariants()?;
        Ok(self.tree)
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

    /// A small fixed tree exercising both sides:
    ///
    /// * `c` is the root's only (right) child;
    /// * `a`, `b` are `c`'s left children, in that order;
    /// * `e` is `c`'s right child;
    /// * `d` is `e`'s left child, `f` its right child.
    ///
    /// In-order traversal reads "abcdef".
    fn sample_tree() -> Tree {
        let mut t = Tree::new();
        let c = eid("r", 0);
        t.attach(c.clone(), 'c', Parent::Root, Side::Right, None, 0)
            .unwrap();
        t.attach(eid("r", 1), 'a', Parent::Element(c.clone()), Side::Left, None, 0)
            .unwrap();
        t.attach(eid("r", 2), 'b', Parent::Element(c.clone()), Side::Left, None, 1)
            .unwrap();
        let e = eid("r", 3);
        t.attach(e.clone(), 'e', Parent::Element(c.clone()), Side::Right, None, 0)
            .unwrap();
        t.attach(eid("r", 4), 'd', Parent::Element(e.clone()), Side::Left, None, 0)
            .unwrap();
        t.attach(eid("r", 5), 'f', Parent::Element(e), Side::Right, None, 0)
            .unwrap();
        t.check_invariants().unwrap();
        t
    }

    #[test]
    fn in_order_traversal_reads_left_children_value_right_children() {
        let t = sample_tree();
        assert_eq!(t.values(), "abcdef");
        let full = t.traverse(true);
        let ids: Vec<u64> = full.iter().map(|e| e.id.counter).collect();
        assert_eq!(ids, vec![1, 2, 0, 4, 3, 5]);
    }

    #[test]
    fn tombstones_vanish_from_values_but_keep_their_slot() {
        let mut t = sample_tree();
        assert!(t.mark_deleted(&eid("r", 2)).unwrap());
        assert_eq!(t.values(), "acdef");
        assert_eq!(t.visible_count(), 5);
        // Idempotent: a second deletion is a no-op.
        assert!(!t.mark_deleted(&eid("r", 2)).unwrap());
        assert_eq!(t.visible_count(), 5);
        // The tombstone still occupies its position in the full order.
        let full: String = t.traverse(true).iter().map(|e| e.value).collect();
        assert_eq!(full, "abcdef");
        assert_eq!(t.traverse(false).len(), 5);
        t.check_invariants().unwrap();
    }

    #[test]
    fn visible_indexing_skips_tombstones_and_checks_bounds() {
        let mut t = sample_tree();
        assert_eq!(t.node_at_visible_index(3).unwrap(), eid("r", 4)); // 'd'
        t.mark_deleted(&eid("r", 1)).unwrap(); // delete 'a'
        assert_eq!(t.node_at_visible_index(0).unwrap(), eid("r", 2)); // now 'b'
        assert_eq!(
            t.node_at_visible_index(5),
            Err(TreeError::IndexOutOfBounds { index: 5, len: 5 })
        );
    }

    #[test]
    fn full_traversal_successors_cover_all_shapes() {
        let t = sample_tree();
        let next = |c: u64| {
            t.next_in_full_traversal(&Parent::Element(eid("r", c)))
                .unwrap()
        };
        // After the document start comes the leftmost node.
        assert_eq!(
            t.next_in_full_traversal(&Parent::Root).unwrap(),
            RightOrigin::Element(eid("r", 1))
        );
        // Left sibling -> next left sibling; last left child -> parent.
        assert_eq!(next(1), RightOrigin::Element(eid("r", 2)));
        assert_eq!(next(2), RightOrigin::Element(eid("r", 0)));
        // A node with a right subtree -> that subtree's leftmost node.
        assert_eq!(next(0), RightOrigin::Element(eid("r", 4)));
        assert_eq!(next(4), RightOrigin::Element(eid("r", 3)));
        // The last node -> end.
        assert_eq!(next(5), RightOrigin::End);
        // Unknown ids are an error, not end.
        assert_eq!(
            t.next_in_full_traversal(&Parent::Element(eid("q", 0))),
            Err(TreeError::UnknownId(eid("q", 0)))
        );
    }

    #[test]
    fn empty_tree_has_no_successor() {
        let t = Tree::new();
        assert_eq!(
            t.next_in_full_traversal(&Parent::Root).unwrap(),
            RightOrigin::End
        );
        assert_eq!(t.values(), "");
    }

    #[test]
    fn attach_rejects_structural_violations() {
        let mut t = Tree::new();
        let a = eid("r", 0);
        t.attach(a.clone(), 'a', Parent::Root, Side::Right, None, 0)
            .unwrap();
        assert_eq!(
            t.attach(a.clone(), 'x', Parent::Root, Side::Right, None, 0),
            Err(TreeError::DuplicateId(a.clone()))
        );
        assert_eq!(
            t.attach(eid("r", 1), 'x', Parent::Element(eid("z", 9)), Side::Left, None, 0),
            Err(TreeError::UnknownParent(eid("z", 9)))
        );
        assert_eq!(
            t.attach(eid("r", 1), 'x', Parent::Root, Side::Left, None, 0),
            Err(TreeError::RootLeftChild)
        );
        assert_eq!(
            t.attach(eid("r", 1), 'x', Parent::Element(a), Side::Left, None, 2),
            Err(TreeError::SiblingPositionOutOfRange { position: 2, len: 0 })
        );
        t.check_invariants().unwrap();
    }

    #[test]
    fn sibling_positions_splice_in_order() {
        let mut t = Tree::new();
        let p = eid("r", 0);
        t.attach(p.clone(), 'p', Parent::Root, Side::Right, None, 0)
            .unwrap();
        // Build the right-child list [x, y, z] via head, tail, and middle splices.
        t.attach(eid("r", 1), 'z', Parent::Element(p.clone()), Side::Right, None, 0)
            .unwrap();
        t.attach(eid("r", 2), 'x', Parent::Element(p.clone()), Side::Right, None, 0)
            .unwrap();
        t.attach(eid("r", 3), 'y', Parent::Element(p.clone()), Side::Right, None, 1)
            .unwrap();
        assert_eq!(t.values(), "pxyz");
        let kids = t.children(&Parent::Element(p), Side::Right).unwrap();
        assert_eq!(
            kids,
            vec![eid("r", 2), eid("r", 3), eid("r", 1)],
            "child list order follows splice positions"
        );
    }

    #[test]
    fn equality_ignores_arrival_order() {
        // Same document assembled in two different orders.
        let mut a = Tree::new();
        a.attach(eid("r", 0), 'x', Parent::Root, Side::Right, None, 0)
            .unwrap();
        a.attach(eid("s", 0), 'y', Parent::Root, Side::Right, None, 1)
            .unwrap();

        let mut b = Tree::new();
        b.attach(eid("s", 0), 'y', Parent::Root, Side::Right, None, 0)
            .unwrap();
        b.attach(eid("r", 0), 'x', Parent::Root, Side::Right, None, 0)
            .unwrap();

        assert_eq!(a, b);
        b.mark_deleted(&eid("s", 0)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn builder_reconstructs_trees_with_forward_references() {
        // Declare all nodes first, then link in traversal order (where the
        // left child 'a' precedes its parent 'c').
        let orig = sample_tree();
        let mut b = TreeBuilder::new();
        for entry in orig.traverse(true) {
            b.declare(&entry.id, entry.value, entry.is_deleted).unwrap();
        }
        for entry in orig.traverse(true) {
            let view = orig.node(&entry.id).unwrap();
            b.link(&entry.id, &view.parent, view.side).unwrap();
        }
        let rebuilt = b.finish().unwrap();
        assert_eq!(rebuilt, orig);
    }

    #[test]
    fn builder_rejects_incomplete_documents() {
        let mut b = TreeBuilder::new();
        b.declare(&eid("r", 0), 'x', false).unwrap();
        assert!(b.finish().is_err(), "declared but never linked");
    }

    #[test]
    fn order_index_matches_the_traversal_under_random_editing() {
        use rand::{Rng, SeedableRng};

        // Grow random trees (arbitrary parents, sides, sibling positions,
        // interleaved deletions) and confirm the logarithmic queries agree
        // with the plain coordinate walk after every single mutation.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0d3e);
        for round in 0..10 {
            let mut t = Tree::new();
            let mut ids: Vec<ElementId> = Vec::new();
            for c in 0..120u64 {
                if !ids.is_empty() && rng.gen_ratio(1, 5) {
                    let victim = ids[rng.gen_range(0..ids.len())].clone();
                    t.mark_deleted(&victim).unwrap();
                } else {
                    let (parent, side) = if ids.is_empty() || rng.gen_ratio(1, 8) {
                        (Parent::Root, Side::Right)
                    } else {
                        let p = ids[rng.gen_range(0..ids.len())].clone();
                        let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
                        (Parent::Element(p), side)
                    };
                    let len = t.children(&parent, side).unwrap().len();
                    let position = rng.gen_range(0..=len);
                    t.attach(eid("r", c), char::from(b'a' + (c % 26) as u8), parent, side, None, position)
                        .unwrap();
                    ids.push(eid("r", c));
                }

                t.check_invariants()
                    .unwrap_or_else(|e| panic!("round {round}: {e}"));
                let full = t.traverse(true);
                let visible: Vec<_> = full.iter().filter(|e| !e.is_deleted).collect();
                assert_eq!(t.visible_count(), visible.len());
                for (k, entry) in visible.iter().enumerate() {
                    assert_eq!(t.node_at_visible_index(k).unwrap(), entry.id);
                }
                assert!(t.node_at_visible_index(visible.len()).is_err());
                assert_eq!(
                    t.next_in_full_traversal(&Parent::Root).unwrap(),
                    full.first()
                        .map(|e| RightOrigin::Element(e.id.clone()))
                        .unwrap_or(RightOrigin::End)
                );
                for w in full.windows(2) {
                    assert_eq!(
                        t.next_in_full_traversal(&Parent::Element(w[0].id.clone())).unwrap(),
                        RightOrigin::Element(w[1].id.clone())
                    );
                }
                if let Some(last) = full.last() {
                    assert_eq!(
                        t.next_in_full_traversal(&Parent::Element(last.id.clone())).unwrap(),
                        RightOrigin::End
                    );
                }
            }
        }
    }
}
