//! The two link-generation schemes for a repeater chain, built on the event
//! engine:
//!
//! * [`SynchronousChain`] — every elementary link attempts in lockstep
//!   rounds paced by the C-node; a round yields an end-to-end pair only if
//!   all links succeed in that same round.
//! * [`IndependentChain`] — each link retries on its own clock and holds its
//!   pair in memory until every link has reported in, then the C-node runs
//!   the swap ladder.
//!
//! Shared pieces live here: the tick table derived from chain geometry, the
//! per-attempt Bernoulli draws, the swap-pairing tree, and the ladder that
//! executes one swap stage at a time.

pub mod independent;
pub mod sync;

pub use independent::IndependentChain;
pub use sync::SynchronousChain;

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::params::HardwareParams;
use crate::record::EntanglementRecord;
use crate::rng::bernoulli;
use crate::time::SimTime;
use crate::topology::ChainTopology;

/// Tick quantities shared by both protocols, each rounded from geometry to
/// integer picoseconds exactly once; everything else is integer arithmetic
/// on these, so event times are exact multiples.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Clocks {
    /// Photon flight from a node to its link's midpoint station, `(ℓ/2)/v`.
    pub t_half_link: SimTime,
    /// Node-to-node hop, `ℓ/v`.
    pub t_one_link: SimTime,
    /// Pacing leg between the C-node and the chain for a synchronized round,
    /// `(L + ℓ)/(2v)`.
    pub t_out_leg: SimTime,
    /// One swap-coordination stage, `L/(2v)`.
    pub t_half_chain: SimTime,
    /// Synchronized round: two pacing legs plus two link round-trips,
    /// `(L + 3ℓ)/v`.
    pub round: SimTime,
    /// Broadcast lead: the farthest node hears the C-node's go-signal after
    /// this many ticks.
    pub lead: SimTime,
    /// Memory lifetime ([`SimTime::NEVER`] when infinite).
    pub tau: SimTime,
    /// Distance a photon covers before its link's midpoint station, km.
    pub half_link_km: f64,
}

impl Clocks {
    pub fn new(params: &HardwareParams, topo: &ChainTopology) -> Clocks {
        let v = params.v_km_per_s;
        let link_km = topo.link_length_km();
        let t_half_link = SimTime::from_distance(link_km / 2.0, v);
        let t_one_link = t_half_link.scaled(2);
        Clocks {
            t_half_link,
            t_one_link,
            t_out_leg: SimTime::from_distance((topo.total_length_km + link_km) / 2.0, v),
            t_half_chain: SimTime::from_distance(topo.total_length_km / 2.0, v),
            round: SimTime::from_distance((topo.total_length_km + link_km) / 2.0, v).scaled(2)
                + t_half_link.scaled(4),
            lead: t_one_link.scaled(topo.max_hops_from_c_node() as u64),
            tau: SimTime::from_secs(params.tau_mem_s),
            half_link_km: link_km / 2.0,
        }
    }

    /// Travel time of a link's completion report to the C-node.
    pub fn notice_delay(&self, topo: &ChainTopology, link: u32) -> SimTime {
        self.t_one_link.scaled(topo.link_report_hops(link) as u64)
    }
}

/// Both memories of a link excite and emit; two independent draws.  Always
/// consumes exactly two values from the stream.
pub(crate) fn draw_emission(rng: &mut ChaCha8Rng, params: &HardwareParams) -> bool {
    let a = bernoulli(rng, params.e_m);
    let b = bernoulli(rng, params.e_m);
    a & b
}

/// The midpoint station resolves: both photons must survive half a link of
/// fiber, both detectors must fire, and the Bell measurement must herald.
/// Always consumes exactly five values from the stream.
pub(crate) fn draw_midpoint(
    rng: &mut ChaCha8Rng,
    params: &HardwareParams,
    half_link_km: f64,
) -> bool {
    let p_fiber = params.fiber_survival(half_link_km);
    let s1 = bernoulli(rng, p_fiber);
    let s2 = bernoulli(rng, p_fiber);
    let d1 = bernoulli(rng, params.e_d);
    let d2 = bernoulli(rng, params.e_d);
    let herald = bernoulli(rng, params.e_b);
    s1 & s2 & d1 & d2 & herald
}

// ---------------------------------------------------------------------------
// swap pairing
// ---------------------------------------------------------------------------

/// The pairing plan for merging a row of adjacent entangled segments into
/// one end-to-end pair.  Stage `s` (1-based) lists the nodes that perform a
/// swap in that stage; adjacent segments pair leftmost-first and an odd
/// trailing segment waits for the next stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapTree {
    pub stages: Vec<Vec<u32>>,
}

impl SwapTree {
    /// Plan for a freshly generated chain of `num_links` elementary segments.
    pub fn for_links(num_links: u32) -> SwapTree {
        let spans: Vec<(u32, u32)> = (0..num_links).map(|i| (i, i + 1)).collect();
        SwapTree::from_spans(&spans)
    }

    /// Plan for an arbitrary row of adjacent segments (used when earlier
    /// merges survived a partial discard).  `spans` must be sorted and
    /// contiguous.
    pub fn from_spans(spans: &[(u32, u32)]) -> SwapTree {
        let mut stages = Vec::new();
        let mut row: Vec<(u32, u32)> = spans.to_vec();
        while row.len() > 1 {
            let mut nodes = Vec::new();
            let mut next = Vec::with_capacity(row.len() / 2 + 1);
            let mut chunks = row.chunks_exact(2);
            for pair in &mut chunks {
                debug_assert_eq!(pair[0].1, pair[1].0, "segments must be adjacent");
                nodes.push(pair[0].1);
                next.push((pair[0].0, pair[1].1));
            }
            if let [odd] = chunks.remainder() {
                next.push(*odd);
            }
            stages.push(nodes);
            row = next;
        }
        SwapTree { stages }
    }

    pub fn num_stages(&self) -> u32 {
        self.stages.len() as u32
    }
}

// ---------------------------------------------------------------------------
// ladder execution
// ---------------------------------------------------------------------------

/// What one swap stage left behind.
pub(crate) enum StageOutcome {
    /// All swaps of the stage merged; more stages remain.
    Advanced,
    /// The final merge produced the end-to-end record.
    Complete(EntanglementRecord),
    /// At least one swap failed (herald or expired input).  The failed
    /// swaps' inputs are consumed; `survivors` is everything else, including
    /// merges that did succeed in this stage.
    Failed { survivors: Vec<EntanglementRecord> },
}

/// An in-flight swap ladder: the records captured when the C-node triggered
/// it, merged stage by stage against a [`SwapTree`].
pub(crate) struct Ladder {
    records: Vec<EntanglementRecord>,
    tree: SwapTree,
    /// Earliest creation among the captured records; the age of the oldest
    /// constituent memory at establishment is measured from here.
    pub min_inception: SimTime,
    min_expiry: SimTime,
    full_span: (u32, u32),
}

impl Ladder {
    pub fn new(records: Vec<EntanglementRecord>) -> Ladder {
        debug_assert!(records.len() > 1, "a single segment needs no ladder");
        debug_assert!(records.windows(2).all(|w| w[0].span.1 == w[1].span.0));
        let tree = SwapTree::from_spans(&records.iter().map(|r| r.span).collect::<Vec<_>>());
        let min_inception = records.iter().map(|r| r.created_at).min().unwrap();
        let min_expiry = records.iter().map(|r| r.expires_at).min().unwrap();
        let full_span = (records[0].span.0, records.last().unwrap().span.1);
        Ladder {
            records,
            tree,
            min_inception,
            min_expiry,
            full_span,
        }
    }

    pub fn num_stages(&self) -> u32 {
        self.tree.num_stages()
    }

    /// Execute stage `stage` (1-based).  Heralding draws for every swap in
    /// the stage are consumed before any outcome is inspected, so the stream
    /// position depends only on how many stages ran.
    pub fn run_stage(
        &mut self,
        stage: u32,
        now: SimTime,
        rng: &mut ChaCha8Rng,
        e_s: f64,
    ) -> StageOutcome {
        let nodes = &self.tree.stages[stage as usize - 1];
        let heralds: Vec<bool> = nodes.iter().map(|_| bernoulli(rng, e_s)).collect();
        let mut failed = false;
        for (&node, &herald) in nodes.iter().zip(&heralds) {
            let left = self
                .records
                .iter()
                .position(|r| r.span.1 == node)
                .expect("swap node must close a segment");
            let right = self
                .records
                .iter()
                .position(|r| r.span.0 == node)
                .expect("swap node must open a segment");
            if !herald {
                failed = true;
                remove_pair(&mut self.records, left, right);
                continue;
            }
            match EntanglementRecord::merge(&self.records[left], &self.records[right], node, now) {
                Ok(merged) => {
                    // Replace the pair with the merged segment, keeping the
                    // row sorted by span.
                    let keep = left.min(right);
                    remove_pair(&mut self.records, left, right);
                    self.records.insert(keep, merged);
                }
                Err(_) => {
                    failed = true;
                    remove_pair(&mut self.records, left, right);
                }
            }
        }
        if failed {
            return StageOutcome::Failed {
                survivors: core::mem::take(&mut self.records),
            };
        }
        if self.records.len() == 1 {
            let record = self.records.pop().unwrap();
            assert_eq!(
                record.span, self.full_span,
                "ladder must close the full span"
            );
            assert_eq!(
                record.expires_at, self.min_expiry,
                "merged lifetime must be the minimum of the constituents"
            );
            return StageOutcome::Complete(record);
        }
        StageOutcome::Advanced
    }
}

fn remove_pair(records: &mut Vec<EntanglementRecord>, a: usize, b: usize) {
    let (first, second) = if a < b { (a, b) } else { (b, a) };
    records.remove(second);
    records.remove(first);
}
