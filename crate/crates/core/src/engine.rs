//! Deterministic discrete-event core: a time-ordered queue with a fixed
//! total order, handle-based cancellation, per-stream RNG, and the run loop
//! that drives a [`Protocol`] until a stop condition is met.
//!
//! Dequeue order is `(fire time, kind priority, schedule sequence)`.  The
//! kind priority settles simultaneous events so that physics stays
//! consistent no matter in which order they were scheduled — most
//! importantly, a memory expiring at tick `t` always fires before a
//! measurement result or a message carrying a success at the same tick.

use alloc::boxed::Box;
use alloc::collections::{BTreeSet, BinaryHeap};
use core::cmp::Ordering;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rng::{RngStreams, StreamId};
use crate::time::SimTime;

// ---------------------------------------------------------------------------
// events
// ---------------------------------------------------------------------------

/// Payload of a classical message (delivered to whoever scheduled it; the
/// simulated node routing is implicit in the delivery time).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Message {
    /// Broadcast from the C-node: all links begin generating.  Fires when
    /// the farthest node has heard it.
    StartGeneration { cycle: u64 },
    /// A link reports a completed elementary entanglement to the C-node.
    /// `created_at` identifies the record so a stale notice (the record
    /// expired or was replaced mid-flight) can be recognized.
    LinkCompleted { link: u32, created_at: SimTime },
    /// Per-link outcome report of a synchronous round reaching the C-node.
    LinkStatus {
        round: u64,
        link: u32,
        success: bool,
    },
    /// The go-ahead for one stage of the swap ladder reaching the repeaters.
    /// `ladder` identifies the cycle the ladder belongs to, because a slow
    /// ladder can still be resolving when the next one starts.
    SwapStage { ladder: u64, stage: u32 },
    /// Confirmation of the finished cycle reaching the C-node.
    CycleComplete,
}

/// What happens, and to whom.  Kind determines same-tick priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// A round or generation cycle begins at the C-node.
    RoundStart { round: u64 },
    /// Both nodes of `link` excite their memories and emit photons.
    EmitPhotons { link: u32 },
    /// The photons of `link` (if any) arrive at the midpoint station and
    /// the measurement resolves.
    PhotonAtBsm { link: u32 },
    /// The measurement outcome of `link` arrives back at the link's nodes.
    BsmResult { link: u32, success: bool },
    /// A classical control message arrives.
    ClassicalMessage { message: Message },
    /// The memory pair created at `created_at` on `link` reaches the end of
    /// its lifetime.
    MemoryExpired { link: u32, created_at: SimTime },
}

impl EventKind {
    /// Same-tick ordering: lower fires first.
    fn priority(&self) -> u8 {
        match self {
            EventKind::MemoryExpired { .. } => 0,
            EventKind::BsmResult { .. } => 1,
            EventKind::PhotonAtBsm { .. } => 2,
            EventKind::ClassicalMessage { .. } => 3,
            EventKind::EmitPhotons { .. } => 4,
            EventKind::RoundStart { .. } => 5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RoundStart { .. } => "RoundStart",
            EventKind::EmitPhotons { .. } => "EmitPhotons",
            EventKind::PhotonAtBsm { .. } => "PhotonAtBSM",
            EventKind::BsmResult { .. } => "BSMResult",
            EventKind::ClassicalMessage { .. } => "ClassicalMessage",
            EventKind::MemoryExpired { .. } => "MemoryExpired",
        }
    }
}

impl fmt::Display for EventKind {
    /// Compact `key=value` payload rendering used by the event trace.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::RoundStart { round } => write!(f, "round={round}"),
            EventKind::EmitPhotons { link } => write!(f, "link={link}"),
            EventKind::PhotonAtBsm { link } => write!(f, "link={link}"),
            EventKind::BsmResult { link, success } => {
                write!(f, "link={link} success={success}")
            }
            EventKind::ClassicalMessage { message } => match message {
                Message::StartGeneration { cycle } => write!(f, "msg=start cycle={cycle}"),
                Message::LinkCompleted { link, created_at } => {
                    write!(f, "msg=link_completed link={link} created_at={created_at}")
                }
                Message::LinkStatus {
                    round,
                    link,
                    success,
                } => {
                    write!(
                        f,
                        "msg=link_status round={round} link={link} success={success}"
                    )
                }
                Message::SwapStage { ladder, stage } => {
                    write!(f, "msg=swap_stage ladder={ladder} stage={stage}")
                }
                Message::CycleComplete => write!(f, "msg=cycle_complete"),
            },
            EventKind::MemoryExpired { link, created_at } => {
                write!(f, "link={link} created_at={created_at}")
            }
        }
    }
}

/// A scheduled occurrence.
#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub fire_at: SimTime,
    /// Monotone schedule counter; the final tie-breaker, so the total order
    /// is reproducible across runs.
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct HeapEntry {
    fire_at: SimTime,
    priority: u8,
    seq: u64,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &HeapEntry) -> Ordering {
        // Reversed so the BinaryHeap max-heap pops the earliest entry.
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.priority.cmp(&self.priority))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &HeapEntry) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Handle returned by [`Engine::schedule`]; lets the scheduler cancel the
/// event as long as it has not fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct EventHandle(u64);

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("cannot schedule an event at {requested:?}, the clock is already at {now:?}")]
    IntoThePast { requested: SimTime, now: SimTime },
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

type Observer = Box<dyn FnMut(&Event)>;

/// Event queue, clock and RNG streams for one simulated trial.
pub struct Engine {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<HeapEntry>,
    // Payloads parallel to heap entries, keyed by seq.  Kept in a map so a
    // cancelled entry's payload is dropped eagerly.
    payloads: alloc::collections::BTreeMap<u64, EventKind>,
    cancelled: BTreeSet<u64>,
    streams: RngStreams,
    observer: Option<Observer>,
    dispatched: u64,
}

impl Engine {
    /// `num_streams` is the number of independent RNG streams; protocols use
    /// one per elementary link plus one for the controller.
    pub fn new(master_seed: u64, num_streams: u32) -> Engine {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            payloads: alloc::collections::BTreeMap::new(),
            cancelled: BTreeSet::new(),
            streams: RngStreams::new(master_seed, num_streams),
            observer: None,
            dispatched: 0,
        }
    }

    #[inline]
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Events dispatched so far.
    #[inline]
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    #[inline]
    pub fn rng(&mut self, id: StreamId) -> &mut ChaCha8Rng {
        self.streams.stream(id)
    }

    /// Install a callback invoked for every event in fire order (used for
    /// trace output).
    pub fn set_observer(&mut self, observer: Observer) {
        self.observer = Some(observer);
    }

    /// Schedule `kind` at `fire_at` (which may equal the current clock; the
    /// event then fires after the in-flight event but before anything
    /// later).  Fails if `fire_at` is in the past.
    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        kind: EventKind,
    ) -> Result<EventHandle, ScheduleError> {
        if fire_at < self.now {
            return Err(ScheduleError::IntoThePast {
                requested: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(HeapEntry {
            fire_at,
            priority: kind.priority(),
            seq,
        });
        self.payloads.insert(seq, kind);
        Ok(EventHandle(seq))
    }

    /// Schedule at an offset from the current clock; offsets are always
    /// non-negative so this cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, kind: EventKind) -> EventHandle {
        self.schedule(self.now + delay, kind)
            .expect("future offsets cannot be in the past")
    }

    /// Cancel a pending event.  Cancelling an event that already fired (or
    /// was already cancelled) is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) {
        if self.payloads.remove(&handle.0).is_some() {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pop the next live event, advancing the clock.
    fn pop(&mut self) -> Option<Event> {
        while let Some(entry) = self.heap.pop() {
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            let kind = self
                .payloads
                .remove(&entry.seq)
                .expect("uncancelled heap entry must have a payload");
            debug_assert!(entry.fire_at >= self.now, "time ran backwards");
            self.now = entry.fire_at;
            self.dispatched += 1;
            return Some(Event {
                fire_at: entry.fire_at,
                seq: entry.seq,
                kind,
            });
        }
        None
    }

    /// Fire time of the next live event without popping it.
    fn peek_time(&mut self) -> Option<SimTime> {
        while let Some(entry) = self.heap.peek() {
            if self.cancelled.contains(&entry.seq) {
                let seq = entry.seq;
                self.heap.pop();
                self.cancelled.remove(&seq);
                continue;
            }
            return Some(entry.fire_at);
        }
        None
    }
}

// ---------------------------------------------------------------------------
// run loop
// ---------------------------------------------------------------------------

/// A chain protocol driven by the engine: it seeds the queue in [`start`]
/// and reacts to every dispatched event.
///
/// [`start`]: Protocol::start
pub trait Protocol {
    fn start(&mut self, engine: &mut Engine);
    fn on_event(&mut self, event: Event, engine: &mut Engine);
    /// End-to-end successes recorded so far (consulted by the stop check).
    fn successes(&self) -> u64;
}

/// When to stop a trial.  At least one bound must be set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCondition {
    pub max_successes: Option<u64>,
    pub max_sim_time: Option<SimTime>,
}

impl StopCondition {
    pub fn successes(n: u64) -> StopCondition {
        StopCondition {
            max_successes: Some(n),
            max_sim_time: None,
        }
    }

    pub fn sim_time(t: SimTime) -> StopCondition {
        StopCondition {
            max_successes: None,
            max_sim_time: Some(t),
        }
    }

    pub fn either(n: u64, t: SimTime) -> StopCondition {
        StopCondition {
            max_successes: Some(n),
            max_sim_time: Some(t),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.max_successes.is_some() || self.max_sim_time.is_some()
    }
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The success target was reached; the clock stands at the last success.
    SuccessTarget,
    /// The simulated-time budget ran out.
    TimeLimit,
    /// The queue drained with the success target unmet — the protocol
    /// livelocked (nothing left to do, nothing achieved).
    Livelock,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunReport {
    pub reason: StopReason,
    /// Simulated time covered by the run: the stop time for time-bounded
    /// runs, the clock at the final event otherwise.
    pub elapsed: SimTime,
    pub events_dispatched: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum RunError {
    #[error("stop condition sets neither a success target nor a time budget")]
    UnboundedStop,
}

/// Drive `protocol` until the stop condition is met.
pub fn run(
    engine: &mut Engine,
    protocol: &mut dyn Protocol,
    stop: StopCondition,
) -> Result<RunReport, RunError> {
    if !stop.is_bounded() {
        return Err(RunError::UnboundedStop);
    }
    protocol.start(engine);
    loop {
        if let Some(target) = stop.max_successes {
            if protocol.successes() >= target {
                return Ok(RunReport {
                    reason: StopReason::SuccessTarget,
                    elapsed: engine.now(),
                    events_dispatched: engine.dispatched(),
                });
            }
        }
        let next = engine.peek_time();
        if let Some(limit) = stop.max_sim_time {
            if next.is_none_or(|t| t > limit) {
                engine.now = limit.max(engine.now);
                return Ok(RunReport {
                    reason: StopReason::TimeLimit,
                    elapsed: limit,
                    events_dispatched: engine.dispatched(),
                });
            }
        }
        let Some(event) = engine.pop() else {
            return Ok(RunReport {
                reason: StopReason::Livelock,
                elapsed: engine.now(),
                events_dispatched: engine.dispatched(),
            });
        };
        if let Some(observer) = engine.observer.as_mut() {
            observer(&event);
        }
        protocol.on_event(event, engine);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn msg_event() -> EventKind {
        EventKind::ClassicalMessage {
            message: Message::CycleComplete,
        }
    }

    #[test]
    fn events_fire_in_time_order() {
        let mut eng = Engine::new(0, 1);
        eng.schedule(SimTime::from_ticks(30), EventKind::RoundStart { round: 2 })
            .unwrap();
        eng.schedule(SimTime::from_ticks(10), EventKind::RoundStart { round: 0 })
            .unwrap();
        eng.schedule(SimTime::from_ticks(20), EventKind::RoundStart { round: 1 })
            .unwrap();
        let mut rounds = Vec::new();
        while let Some(ev) = eng.pop() {
            if let EventKind::RoundStart { round } = ev.kind {
                rounds.push(round);
            }
        }
        assert_eq!(rounds, alloc::vec![0, 1, 2]);
    }

    #[test]
    fn expiry_beats_result_on_the_same_tick() {
        let mut eng = Engine::new(0, 1);
        let t = SimTime::from_ticks(100);
        // Scheduled in the "wrong" order on purpose: insertion order must
        // not matter when kinds differ.
        eng.schedule(
            t,
            EventKind::BsmResult {
                link: 0,
                success: true,
            },
        )
        .unwrap();
        eng.schedule(
            t,
            EventKind::MemoryExpired {
                link: 0,
                created_at: SimTime::ZERO,
            },
        )
        .unwrap();
        let first = eng.pop().unwrap();
        assert!(matches!(first.kind, EventKind::MemoryExpired { .. }));
        let second = eng.pop().unwrap();
        assert!(matches!(second.kind, EventKind::BsmResult { .. }));
    }

    #[test]
    fn full_priority_ladder_on_one_tick() {
        let mut eng = Engine::new(0, 1);
        let t = SimTime::from_ticks(5);
        eng.schedule(t, EventKind::RoundStart { round: 0 }).unwrap();
        eng.schedule(t, EventKind::EmitPhotons { link: 0 }).unwrap();
        eng.schedule(t, msg_event()).unwrap();
        eng.schedule(t, EventKind::PhotonAtBsm { link: 0 }).unwrap();
        eng.schedule(
            t,
            EventKind::BsmResult {
                link: 0,
                success: false,
            },
        )
        .unwrap();
        eng.schedule(
            t,
            EventKind::MemoryExpired {
                link: 0,
                created_at: SimTime::ZERO,
            },
        )
        .unwrap();
        let mut names = Vec::new();
        while let Some(ev) = eng.pop() {
            names.push(ev.kind.name());
        }
        assert_eq!(
            names,
            alloc::vec![
                "MemoryExpired",
                "BSMResult",
                "PhotonAtBSM",
                "ClassicalMessage",
                "EmitPhotons",
                "RoundStart"
            ]
        );
    }

    #[test]
    fn same_kind_same_tick_fifo_by_schedule_order() {
        let mut eng = Engine::new(0, 1);
        let t = SimTime::from_ticks(5);
        eng.schedule(t, EventKind::EmitPhotons { link: 7 }).unwrap();
        eng.schedule(t, EventKind::EmitPhotons { link: 3 }).unwrap();
        let first = eng.pop().unwrap();
        assert_eq!(first.kind, EventKind::EmitPhotons { link: 7 });
    }

    #[test]
    fn cancelled_events_never_fire() {
        let mut eng = Engine::new(0, 1);
        let h = eng.schedule(SimTime::from_ticks(10), msg_event()).unwrap();
        eng.schedule(SimTime::from_ticks(20), EventKind::RoundStart { round: 1 })
            .unwrap();
        eng.cancel(h);
        let ev = eng.pop().unwrap();
        assert!(matches!(ev.kind, EventKind::RoundStart { .. }));
        assert!(eng.pop().is_none());
        // Cancelling again (or after the fact) is a harmless no-op.
        eng.cancel(h);
    }

    #[test]
    fn scheduling_into_the_past_is_rejected() {
        let mut eng = Engine::new(0, 1);
        eng.schedule(SimTime::from_ticks(50), msg_event()).unwrap();
        eng.pop().unwrap();
        assert_eq!(
            eng.schedule(SimTime::from_ticks(49), msg_event()),
            Err(ScheduleError::IntoThePast {
                requested: SimTime::from_ticks(49),
                now: SimTime::from_ticks(50),
            })
        );
        // Scheduling at exactly `now` is allowed.
        assert!(eng.schedule(SimTime::from_ticks(50), msg_event()).is_ok());
    }

    struct Idle;
    impl Protocol for Idle {
        fn start(&mut self, _engine: &mut Engine) {}
        fn on_event(&mut self, _event: Event, _engine: &mut Engine) {}
        fn successes(&self) -> u64 {
            0
        }
    }

    #[test]
    fn empty_protocol_runs_to_the_time_limit() {
        let mut eng = Engine::new(0, 1);
        let mut idle = Idle;
        let report = run(
            &mut eng,
            &mut idle,
            StopCondition::sim_time(SimTime::from_secs(1.0)),
        )
        .unwrap();
        assert_eq!(report.reason, StopReason::TimeLimit);
        assert_eq!(report.elapsed, SimTime::from_secs(1.0));
        assert_eq!(report.events_dispatched, 0);
    }

    #[test]
    fn empty_protocol_with_success_target_reports_livelock() {
        let mut eng = Engine::new(0, 1);
        let mut idle = Idle;
        let report = run(&mut eng, &mut idle, StopCondition::successes(1)).unwrap();
        assert_eq!(report.reason, StopReason::Livelock);
    }

    #[test]
    fn unbounded_stop_is_rejected() {
        let mut eng = Engine::new(0, 1);
        let mut idle = Idle;
        let stop = StopCondition {
            max_successes: None,
            max_sim_time: None,
        };
        assert_eq!(run(&mut eng, &mut idle, stop), Err(RunError::UnboundedStop));
    }

    /// A protocol that reschedules itself forever and marks a success on
    /// every third event; used to exercise the stop checks.
    struct Ticker {
        count: u64,
    }
    impl Protocol for Ticker {
        fn start(&mut self, engine: &mut Engine) {
            engine
                .schedule(SimTime::from_ticks(10), EventKind::RoundStart { round: 0 })
                .unwrap();
        }
        fn on_event(&mut self, event: Event, engine: &mut Engine) {
            self.count += 1;
            if let EventKind::RoundStart { round } = event.kind {
                engine.schedule_in(
                    SimTime::from_ticks(10),
                    EventKind::RoundStart { round: round + 1 },
                );
            }
        }
        fn successes(&self) -> u64 {
            self.count / 3
        }
    }

    #[test]
    fn success_target_stops_at_the_event_that_reached_it() {
        let mut eng = Engine::new(0, 1);
        let mut ticker = Ticker { count: 0 };
        let report = run(&mut eng, &mut ticker, StopCondition::successes(2)).unwrap();
        assert_eq!(report.reason, StopReason::SuccessTarget);
        // The sixth event fires at tick 60.
        assert_eq!(report.elapsed, SimTime::from_ticks(60));
        assert_eq!(report.events_dispatched, 6);
    }

    #[test]
    fn time_limit_wins_when_it_comes_first() {
        let mut eng = Engine::new(0, 1);
        let mut ticker = Ticker { count: 0 };
        let report = run(
            &mut eng,
            &mut ticker,
            StopCondition::either(1_000_000, SimTime::from_ticks(35)),
        )
        .unwrap();
        assert_eq!(report.reason, StopReason::TimeLimit);
        assert_eq!(report.elapsed, SimTime::from_ticks(35));
        // Events at ticks 10, 20, 30 fired; tick 40 is past the limit.
        assert_eq!(report.events_dispatched, 3);
    }

    #[test]
    fn observer_sees_every_event_in_fire_order() {
        use core::cell::RefCell;

        let seen: alloc::rc::Rc<RefCell<Vec<u64>>> = alloc::rc::Rc::new(RefCell::new(Vec::new()));
        let sink = seen.clone();
        let mut eng = Engine::new(0, 1);
        eng.set_observer(Box::new(move |ev| {
            sink.borrow_mut().push(ev.fire_at.ticks());
        }));
        let mut ticker = Ticker { count: 0 };
        run(
            &mut eng,
            &mut ticker,
            StopCondition::either(u64::MAX, SimTime::from_ticks(30)),
        )
        .unwrap();
        assert_eq!(*seen.borrow(), alloc::vec![10, 20, 30]);
    }
}
