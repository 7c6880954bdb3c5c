//! Independent generation: after the C-node's go-broadcast every elementary
//! link retries on its own clock (one attempt per `3ℓ/v` window) and, once
//! successful, parks its pair in memory.  Completion notices travel to the
//! C-node; the moment the last outstanding link is known to be done the
//! swap ladder starts, one stage per `L/(2v)`.
//!
//! A held pair that times out before the ladder starts throws only its own
//! link back into generation, at the instant of the expiry.  A swap that
//! fails (herald or expired input) normally discards the whole batch and the
//! C-node re-broadcasts; with [`IndependentChain::partial_discard`] enabled
//! only the failed swap's inputs are lost and surviving segments stay in
//! memory while the gap regenerates.
//!
//! Attempt anatomy, from a link-local start `T`:
//!
//! ```text
//! T + ℓ/v       emission, memories load
//! T + 1.5 ℓ/v   midpoint measurement (memories must still be alive)
//! T + 2 ℓ/v     heralds back at the nodes; on failure the next attempt
//!               begins at T + 3ℓ/v
//! ```

use alloc::vec::Vec;

use crate::engine::{Engine, Event, EventHandle, EventKind, Message, Protocol};
use crate::params::HardwareParams;
use crate::protocols::{draw_emission, draw_midpoint, Clocks, Ladder, StageOutcome};
use crate::record::EntanglementRecord;
use crate::rng::{expiry_time, StreamId};
use crate::stats::TrialStats;
use crate::time::SimTime;
use crate::topology::ChainTopology;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Phase {
    /// Links are attempting or holding; the C-node is collecting notices.
    Generating,
    /// All links reported in; swap stages are in flight.  No generation
    /// attempts and no expiry events exist in this phase — record lifetimes
    /// are checked against the clock at each merge instead.
    Ladder,
}

/// Per-link generation scratch state.
#[derive(Default)]
struct GenSlot {
    emit_ok: bool,
    /// Record created at emission, dropped again if the attempt fails.
    pending: Option<EntanglementRecord>,
}

/// A confirmed entangled segment parked in memories.
struct Segment {
    rec: EntanglementRecord,
    /// The C-node has received (or coordinated) this segment's completion.
    noticed: bool,
    expiry: Option<EventHandle>,
}

pub struct IndependentChain {
    params: HardwareParams,
    topo: ChainTopology,
    clocks: Clocks,
    pub partial_discard: bool,
    phase: Phase,
    /// Go-broadcasts issued; tags `StartGeneration` so a handler can assert
    /// it is acting on the current cycle.
    cycle: u64,
    /// Ladders started; tags `SwapStage` events so stages of an abandoned
    /// ladder are recognized as stale and ignored.
    ladder_seq: u64,
    gen: Vec<GenSlot>,
    /// Held segments, disjoint and sorted by left node.
    segments: Vec<Segment>,
    ladder: Option<Ladder>,
    stats: TrialStats,
}

impl IndependentChain {
    pub fn new(
        params: HardwareParams,
        topo: ChainTopology,
        partial_discard: bool,
    ) -> IndependentChain {
        debug_assert!(params.validate().is_ok());
        let clocks = Clocks::new(&params, &topo);
        let n = topo.num_links();
        IndependentChain {
            params,
            topo,
            clocks,
            partial_discard,
            phase: Phase::Generating,
            cycle: 0,
            ladder_seq: 0,
            gen: (0..n).map(|_| GenSlot::default()).collect(),
            segments: Vec::with_capacity(n as usize),
            ladder: None,
            stats: TrialStats::new(n),
        }
    }

    pub fn stats(&self) -> &TrialStats {
        &self.stats
    }

    /// Consume the protocol after a run, stamping the covered time span.
    pub fn finish(self, elapsed: SimTime) -> TrialStats {
        let mut stats = self.stats;
        stats.elapsed = elapsed;
        stats
    }

    /// Issue the next go-broadcast; generation starts once the farthest
    /// node has heard it.
    fn broadcast(&mut self, engine: &mut Engine) {
        self.cycle += 1;
        engine.schedule_in(
            self.clocks.lead,
            EventKind::ClassicalMessage {
                message: Message::StartGeneration { cycle: self.cycle },
            },
        );
    }

    /// Begin a fresh attempt for `link`: the emission fires one link flight
    /// after the attempt window opens.
    fn start_attempt(&mut self, engine: &mut Engine, link: u32) {
        engine.schedule_in(self.clocks.t_one_link, EventKind::EmitPhotons { link });
    }

    fn record_success(&mut self, now: SimTime, oldest_inception: SimTime) {
        self.stats.successes += 1;
        self.stats.success_times.push(now);
        self.stats.oldest_age_samples.push(now - oldest_inception);
    }

    fn insert_segment(&mut self, segment: Segment) {
        let at = self
            .segments
            .partition_point(|s| s.rec.span.0 < segment.rec.span.0);
        self.segments.insert(at, segment);
    }

    /// True when the noticed segments tile every link of the chain.
    fn chain_fully_reported(&self) -> bool {
        if !self.segments.iter().all(|s| s.noticed) {
            return false;
        }
        let covered: u32 = self
            .segments
            .iter()
            .map(|s| s.rec.span.1 - s.rec.span.0)
            .sum();
        covered == self.topo.num_links()
    }

    /// The last outstanding notice just landed: capture the segments and
    /// schedule the swap stages.
    fn start_ladder(&mut self, engine: &mut Engine, now: SimTime) {
        let captured: Vec<EntanglementRecord> = self
            .segments
            .drain(..)
            .map(|mut seg| {
                if let Some(handle) = seg.expiry.take() {
                    engine.cancel(handle);
                }
                seg.rec
            })
            .collect();
        if captured.len() == 1 {
            // A single segment already spans the chain (no repeaters).
            let rec = captured[0];
            debug_assert_eq!(rec.span, (0, self.topo.num_links()));
            self.record_success(now, rec.created_at);
            self.broadcast(engine);
            return;
        }
        self.phase = Phase::Ladder;
        self.ladder_seq += 1;
        let ladder = Ladder::new(captured);
        for stage in 1..=ladder.num_stages() {
            engine.schedule_in(
                self.clocks.t_half_chain.scaled(stage as u64),
                EventKind::ClassicalMessage {
                    message: Message::SwapStage {
                        ladder: self.ladder_seq,
                        stage,
                    },
                },
            );
        }
        self.ladder = Some(ladder);
    }

    fn run_ladder_stage(&mut self, engine: &mut Engine, now: SimTime, id: u64, stage: u32) {
        if self.phase != Phase::Ladder || id != self.ladder_seq {
            return; // stage of an abandoned ladder
        }
        let ladder = self.ladder.as_mut().expect("ladder phase holds a ladder");
        let rng = engine.rng(StreamId::controller(self.topo.num_links()));
        let outcome = ladder.run_stage(stage, now, rng, self.params.e_s);
        let oldest = ladder.min_inception;
        match outcome {
            StageOutcome::Advanced => {}
            StageOutcome::Complete(record) => {
                debug_assert_eq!(record.span, (0, self.topo.num_links()));
                self.ladder = None;
                self.phase = Phase::Generating;
                self.record_success(now, oldest);
                self.broadcast(engine);
            }
            StageOutcome::Failed { survivors } => {
                self.ladder = None;
                self.phase = Phase::Generating;
                if self.partial_discard {
                    self.rehold_survivors(engine, now, survivors);
                } else {
                    drop(survivors);
                    self.broadcast(engine);
                }
            }
        }
    }

    /// Partial-discard recovery: surviving segments go back into held
    /// memory (the C-node coordinated the ladder, so they count as
    /// noticed) and every uncovered link restarts at this instant.
    fn rehold_survivors(
        &mut self,
        engine: &mut Engine,
        now: SimTime,
        survivors: Vec<EntanglementRecord>,
    ) {
        debug_assert!(self.segments.is_empty());
        for rec in survivors {
            if !rec.alive_at(now) {
                continue; // an untouched segment may have lapsed mid-ladder
            }
            let expiry = (rec.expires_at != SimTime::NEVER).then(|| {
                engine
                    .schedule(
                        rec.expires_at,
                        EventKind::MemoryExpired {
                            link: rec.span.0,
                            created_at: rec.created_at,
                        },
                    )
                    .expect("a live record expires in the future")
            });
            self.insert_segment(Segment {
                rec,
                noticed: true,
                expiry,
            });
        }
        let mut covered = alloc::vec![false; self.topo.num_links() as usize];
        for seg in &self.segments {
            for link in seg.rec.span.0..seg.rec.span.1 {
                covered[link as usize] = true;
            }
        }
        for link in 0..self.topo.num_links() {
            if !covered[link as usize] {
                self.start_attempt(engine, link);
            }
        }
    }
}

impl Protocol for IndependentChain {
    fn start(&mut self, engine: &mut Engine) {
        self.broadcast(engine);
    }

    fn on_event(&mut self, event: Event, engine: &mut Engine) {
        let now = event.fire_at;
        match event.kind {
            EventKind::ClassicalMessage {
                message: Message::StartGeneration { cycle },
            } => {
                debug_assert_eq!(cycle, self.cycle);
                debug_assert!(self.segments.is_empty());
                self.stats.rounds += 1;
                for link in 0..self.topo.num_links() {
                    self.start_attempt(engine, link);
                }
            }
            EventKind::EmitPhotons { link } => {
                debug_assert_eq!(self.phase, Phase::Generating);
                let slot = &mut self.gen[link as usize];
                debug_assert!(slot.pending.is_none());
                self.stats.attempts_per_link[link as usize] += 1;
                slot.emit_ok = draw_emission(engine.rng(StreamId::link(link)), &self.params);
                self.gen[link as usize].pending = Some(EntanglementRecord::elementary(
                    link,
                    now,
                    expiry_time(now, self.clocks.tau),
                ));
                engine.schedule_in(self.clocks.t_half_link, EventKind::PhotonAtBsm { link });
            }
            EventKind::PhotonAtBsm { link } => {
                let midpoint = draw_midpoint(
                    engine.rng(StreamId::link(link)),
                    &self.params,
                    self.clocks.half_link_km,
                );
                let slot = &mut self.gen[link as usize];
                let alive = slot
                    .pending
                    .as_ref()
                    .expect("emission created a record")
                    .alive_at(now);
                let success = slot.emit_ok & midpoint & alive;
                if !success {
                    slot.pending = None;
                }
                engine.schedule_in(
                    self.clocks.t_half_link,
                    EventKind::BsmResult { link, success },
                );
            }
            EventKind::BsmResult { link, success } => {
                if !success {
                    // Next attempt window opens at T + 3ℓ/v; its emission is
                    // one link flight later, i.e. 2ℓ/v from here.
                    engine.schedule_in(
                        self.clocks.t_half_link.scaled(4),
                        EventKind::EmitPhotons { link },
                    );
                    return;
                }
                let rec = self.gen[link as usize]
                    .pending
                    .take()
                    .expect("successful attempt keeps its record");
                if !rec.alive_at(now) {
                    // Confirmed, but the pair died while the herald was in
                    // flight (τ < ℓ/v).  Retry on the normal cadence.
                    engine.schedule_in(
                        self.clocks.t_half_link.scaled(4),
                        EventKind::EmitPhotons { link },
                    );
                    return;
                }
                let expiry = (rec.expires_at != SimTime::NEVER).then(|| {
                    engine
                        .schedule(
                            rec.expires_at,
                            EventKind::MemoryExpired {
                                link,
                                created_at: rec.created_at,
                            },
                        )
                        .expect("a live record expires in the future")
                });
                let notice_in = self.clocks.notice_delay(&self.topo, link);
                engine.schedule_in(
                    notice_in,
                    EventKind::ClassicalMessage {
                        message: Message::LinkCompleted {
                            link,
                            created_at: rec.created_at,
                        },
                    },
                );
                self.insert_segment(Segment {
                    rec,
                    noticed: false,
                    expiry,
                });
            }
            EventKind::ClassicalMessage {
                message: Message::LinkCompleted { link, created_at },
            } => {
                if self.phase != Phase::Generating {
                    return; // notice outlived its cycle
                }
                let Some(seg) = self
                    .segments
                    .iter_mut()
                    .find(|s| s.rec.span == (link, link + 1) && s.rec.created_at == created_at)
                else {
                    return; // the pair expired while the notice travelled
                };
                seg.noticed = true;
                if self.chain_fully_reported() {
                    self.start_ladder(engine, now);
                }
            }
            EventKind::MemoryExpired { link, created_at } => {
                debug_assert_eq!(self.phase, Phase::Generating);
                let idx = self
                    .segments
                    .iter()
                    .position(|s| s.rec.span.0 == link && s.rec.created_at == created_at);
                let Some(idx) = idx else {
                    debug_assert!(false, "expiry events are cancelled with their segment");
                    return;
                };
                let seg = self.segments.remove(idx);
                debug_assert!(!seg.rec.alive_at(now));
                for lapsed in seg.rec.span.0..seg.rec.span.1 {
                    self.start_attempt(engine, lapsed);
                }
            }
            EventKind::ClassicalMessage {
                message: Message::SwapStage { ladder, stage },
            } => {
                self.run_ladder_stage(engine, now, ladder, stage);
            }
            _ => debug_assert!(
                false,
                "unexpected event in independent mode: {:?}",
                event.kind
            ),
        }
    }

    fn successes(&self) -> u64 {
        self.stats.successes
    }
}
