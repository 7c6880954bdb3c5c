//! Entanglement bookkeeping: which memory slots hold each entangled pair,
//! when the pair came into being, and when it stops being usable.

use thiserror::Error;

use crate::time::SimTime;

/// Which of a node's two memory slots a record occupies.  A node's `Right`
/// slot faces the link to its right (higher node index), `Left` the link to
/// its left.  End nodes only ever use one of the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// One quantum memory: a node index plus the slot on that node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MemoryId {
    pub node: u32,
    pub side: Side,
}

impl MemoryId {
    pub const fn new(node: u32, side: Side) -> MemoryId {
        MemoryId { node, side }
    }
}

/// An entangled pair of memories spanning `span.0 .. span.1` of the chain.
///
/// `created_at` is when this particular record came into being: photon
/// emission for an elementary pair, the swap instant for a merged pair.
/// `expires_at` is inherited through swaps as the minimum of the parents'
/// expiries, so it always tracks the oldest constituent memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntanglementRecord {
    pub memory_a: MemoryId,
    pub memory_b: MemoryId,
    pub created_at: SimTime,
    pub expires_at: SimTime,
    /// `(left node, right node)` endpoints, always `span.0 < span.1`.
    pub span: (u32, u32),
}

#[derive(Debug, Error, PartialEq)]
pub enum SwapError {
    #[error("records span ({0}, {1}) and ({2}, {3}) are not adjacent at node {4}")]
    NotAdjacent(u32, u32, u32, u32, u32),
    #[error("input record expired at {expired_at:?}, swap attempted at {now:?}")]
    ExpiredInput { expired_at: SimTime, now: SimTime },
}

impl EntanglementRecord {
    /// Freshly generated pair over elementary link `link` (nodes `link` and
    /// `link + 1`), entangled since `created_at`.
    pub fn elementary(link: u32, created_at: SimTime, expires_at: SimTime) -> EntanglementRecord {
        EntanglementRecord {
            memory_a: MemoryId::new(link, Side::Right),
            memory_b: MemoryId::new(link + 1, Side::Left),
            created_at,
            expires_at,
            span: (link, link + 1),
        }
    }

    /// Usable at time `t`?  Expiry at exactly `t` counts as expired: an
    /// expiry beats any success heralded on the same tick.
    #[inline]
    pub fn alive_at(&self, t: SimTime) -> bool {
        self.expires_at > t
    }

    /// Merge two adjacent records through a successful swap at `at_node`,
    /// performed at time `now`.  The caller is responsible for the Bernoulli
    /// swap draw; this only does the (validated) bookkeeping.
    pub fn merge(
        left: &EntanglementRecord,
        right: &EntanglementRecord,
        at_node: u32,
        now: SimTime,
    ) -> Result<EntanglementRecord, SwapError> {
        if left.span.1 != at_node || right.span.0 != at_node {
            return Err(SwapError::NotAdjacent(
                left.span.0,
                left.span.1,
                right.span.0,
                right.span.1,
                at_node,
            ));
        }
        for rec in [left, right] {
            if !rec.alive_at(now) {
                return Err(SwapError::ExpiredInput {
                    expired_at: rec.expires_at,
                    now,
                });
            }
        }
        Ok(EntanglementRecord {
            memory_a: left.memory_a,
            memory_b: right.memory_b,
            created_at: now,
            expires_at: left.expires_at.min(right.expires_at),
            span: (left.span.0, right.span.1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(span: (u32, u32), expires: u64) -> EntanglementRecord {
        EntanglementRecord {
            memory_a: MemoryId::new(span.0, Side::Right),
            memory_b: MemoryId::new(span.1, Side::Left),
            created_at: SimTime::ZERO,
            expires_at: SimTime::from_ticks(expires),
            span,
        }
    }

    #[test]
    fn merge_widens_span_and_keeps_min_expiry() {
        let left = rec((0, 1), 500);
        let right = rec((1, 2), 300);
        let merged = EntanglementRecord::merge(&left, &right, 1, SimTime::from_ticks(100)).unwrap();
        assert_eq!(merged.span, (0, 2));
        assert_eq!(merged.expires_at, SimTime::from_ticks(300));
        assert_eq!(merged.created_at, SimTime::from_ticks(100));
        assert_eq!(merged.memory_a, MemoryId::new(0, Side::Right));
        assert_eq!(merged.memory_b, MemoryId::new(2, Side::Left));
    }

    #[test]
    fn merge_rejects_non_adjacent_records() {
        let left = rec((0, 1), 500);
        let right = rec((2, 3), 500);
        assert!(matches!(
            EntanglementRecord::merge(&left, &right, 1, SimTime::ZERO),
            Err(SwapError::NotAdjacent(..))
        ));
        // Adjacent, but at the wrong node.
        let right = rec((1, 2), 500);
        assert!(matches!(
            EntanglementRecord::merge(&left, &right, 2, SimTime::ZERO),
            Err(SwapError::NotAdjacent(..))
        ));
    }

    #[test]
    fn merge_rejects_expired_inputs() {
        let left = rec((0, 1), 100);
        let right = rec((1, 2), 500);
        // Expiry at exactly `now` is already dead.
        assert!(matches!(
            EntanglementRecord::merge(&left, &right, 1, SimTime::from_ticks(100)),
            Err(SwapError::ExpiredInput { .. })
        ));
    }

    #[test]
    fn infinite_lifetime_propagates_through_min() {
        let left = rec((0, 1), 700);
        let mut right = rec((1, 2), 0);
        right.expires_at = SimTime::NEVER;
        let merged = EntanglementRecord::merge(&left, &right, 1, SimTime::ZERO).unwrap();
        assert_eq!(merged.expires_at, SimTime::from_ticks(700));
    }
}
