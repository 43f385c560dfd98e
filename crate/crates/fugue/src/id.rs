//! Identity types for replicated-list elements.
//!
//! Every inserted element is permanently identified by an [`ElementId`]: the
//! [`ReplicaId`] of the replica that created it plus that replica's private
//! insertion counter. The pair is globally unique as long as each replica
//! increments its own counter for every insert, which [`crate::engine::Replica`]
//! enforces.
//!
//! Element ids carry a total order — replica name first (bytewise), counter
//! second — used to break ties between concurrent siblings. The tree root is
//! *not* an element and never participates in that order; references that may
//! point at the root use [`Parent`], and references that may point past the
//! end of the document use [`RightOrigin`]. Keeping the sentinels in separate
//! enums makes "the root is never compared against an element id" a
//! type-level fact instead of a runtime convention.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Error constructing identity values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    /// Replica names are opaque byte strings but must be nonempty, otherwise
    /// two distinct replicas could collide with the shortest name.
    #[error("replica name must be nonempty")]
    EmptyReplicaName,
}

/// Stable identity of a participant (a device, a process, a user agent).
///
/// Names are opaque UTF-8 byte strings, compared bytewise; the comparison
/// order matters because it breaks ties between concurrent inserts, so it has
/// to be the same on every replica. Cloning is cheap (shared allocation).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReplicaId(Arc<str>);

impl ReplicaId {
    /// Creates a replica id, rejecting the empty name.
    pub fn new(name: impl AsRef<str>) -> Result<Self, IdError> {
        let name = name.as_ref();
        if name.is_empty() {
            return Err(IdError::EmptyReplicaName);
        }
        Ok(ReplicaId(Arc::from(name)))
    }

    /// The name as text.
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The raw bytes that define the comparison order.
    pub fn bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl PartialOrd for ReplicaId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ReplicaId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bytes().cmp(other.bytes())
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for ReplicaId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReplicaId::new(s)
    }
}

/// Permanent identity of one inserted element.
///
/// Ordered by replica name bytes first, counter second. The derived ordering
/// below relies on field order, so keep `replica` before `counter`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId {
    /// Replica that generated the insert.
    pub replica: ReplicaId,
    /// That replica's private insert counter (0-based, never reused).
    pub counter: u64,
}

impl ElementId {
    /// Convenience constructor.
    pub fn new(replica: ReplicaId, counter: u64) -> Self {
        ElementId { replica, counter }
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.replica, self.counter)
    }
}

/// Which side of its parent a tree node hangs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Before the parent in document order.
    Left,
    /// After the parent in document order.
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "L",
            Side::Right => "R",
        })
    }
}

/// A tree-parent reference: either the synthetic root or a real element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Parent {
    /// The valueless root that anchors every document.
    Root,
    /// A real element.
    Element(ElementId),
}

impl fmt::Display for Parent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parent::Root => f.write_str("root"),
            Parent::Element(id) => id.fmt(f),
        }
    }
}

/// The element that followed an insertion point, or the end of the document.
///
/// Recorded on FugueMax right children (it drives their sibling order) and
/// reconstructed by the oracles for every element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RightOrigin {
    /// A real element followed the insertion point.
    Element(ElementId),
    /// Nothing followed: the element was inserted at the end.
    End,
}

impl fmt::Display for RightOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RightOrigin::Element(id) => id.fmt(f),
            RightOrigin::End => f.write_str("end"),
        }
    }
}

/// The element that preceded an insertion point, or the start of the document.
///
/// Not stored by the engines (it is implied by tree position); reconstructed
/// by the oracles from execution logs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeftOrigin {
    /// Nothing preceded: the element was inserted at index 0.
    Start,
    /// A real element preceded the insertion point.
    Element(ElementId),
}

impl fmt::Display for LeftOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeftOrigin::Start => f.write_str("start"),
            LeftOrigin::Element(id) => id.fmt(f),
        }
    }
}
