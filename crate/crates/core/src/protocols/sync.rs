//! Lockstep generation: the C-node paces fixed-length rounds in which every
//! elementary link attempts exactly once, simultaneously.  A round yields an
//! end-to-end pair only when all links succeed in that same round; the swap
//! ladder then runs while the next round is already underway.
//!
//! Round anatomy (durations in link flight times, `ℓ/v`):
//!
//! ```text
//! t0                                  pacing leg out        (L + ℓ)/(2v)
//! t0 + out                            first link round-trip  ℓ/v
//! t0 + out + ℓ/v                      emission, memories load
//! t0 + out + 1.5 ℓ/v                  midpoint measurement
//! t0 + out + 2 ℓ/v                    heralds back at the nodes
//! t0 + out + 2 ℓ/v + out              statuses at the C-node = next round
//! ```
//!
//! Memories only have to live from emission to the midpoint measurement
//! (half a link flight) for the link itself, and further through the swap
//! stages when the round went fully green.  Rounds repeat unconditionally,
//! so the cadence is exactly `(L + 3ℓ)/v`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::engine::{Engine, Event, EventKind, Message, Protocol};
use crate::params::HardwareParams;
use crate::protocols::{draw_emission, draw_midpoint, Clocks, Ladder, StageOutcome, SwapTree};
use crate::record::EntanglementRecord;
use crate::rng::{expiry_time, StreamId};
use crate::stats::TrialStats;
use crate::time::SimTime;
use crate::topology::ChainTopology;

pub struct SynchronousChain {
    params: HardwareParams,
    topo: ChainTopology,
    clocks: Clocks,
    num_stages: u32,
    /// Round currently generating (statuses of a round arrive before the
    /// next `RoundStart` bumps this).
    round: u64,
    emit_ok: Vec<bool>,
    records: Vec<Option<EntanglementRecord>>,
    statuses_in: u32,
    all_ok: bool,
    /// Ladders still resolving, keyed by the round that spawned them; a
    /// ladder can outlive its round when stages extend past the cadence.
    ladders: BTreeMap<u64, Ladder>,
    stats: TrialStats,
}

impl SynchronousChain {
    pub fn new(params: HardwareParams, topo: ChainTopology) -> SynchronousChain {
        debug_assert!(params.validate().is_ok());
        let clocks = Clocks::new(&params, &topo);
        let n = topo.num_links();
        SynchronousChain {
            params,
            topo,
            clocks,
            num_stages: SwapTree::for_links(n).num_stages(),
            round: 0,
            emit_ok: alloc::vec![false; n as usize],
            records: alloc::vec![None; n as usize],
            statuses_in: 0,
            all_ok: true,
            ladders: BTreeMap::new(),
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

    fn record_success(&mut self, now: SimTime, oldest_inception: SimTime) {
        self.stats.successes += 1;
        self.stats.success_times.push(now);
        self.stats.oldest_age_samples.push(now - oldest_inception);
    }

    /// All statuses of round `round` are in; consume the round's records.
    fn finish_round(&mut self, engine: &mut Engine, now: SimTime, round: u64) {
        if !self.all_ok {
            for slot in &mut self.records {
                *slot = None;
            }
            return;
        }
        if self.topo.num_links() == 1 {
            let rec = self.records[0]
                .take()
                .expect("green round keeps its record");
            self.record_success(now, rec.created_at);
            return;
        }
        let captured: Vec<EntanglementRecord> = self
            .records
            .iter_mut()
            .map(|slot| slot.take().expect("green round keeps its records"))
            .collect();
        self.ladders.insert(round, Ladder::new(captured));
        for stage in 1..=self.num_stages {
            engine.schedule_in(
                self.clocks.t_half_chain.scaled(stage as u64),
                EventKind::ClassicalMessage {
                    message: Message::SwapStage {
                        ladder: round,
                        stage,
                    },
                },
            );
        }
    }

    fn run_ladder_stage(&mut self, engine: &mut Engine, now: SimTime, id: u64, stage: u32) {
        let Some(ladder) = self.ladders.get_mut(&id) else {
            // The ladder already failed at an earlier stage.
            return;
        };
        let rng = engine.rng(StreamId::controller(self.topo.num_links()));
        let outcome = ladder.run_stage(stage, now, rng, self.params.e_s);
        let oldest = ladder.min_inception;
        match outcome {
            StageOutcome::Advanced => {}
            StageOutcome::Complete(record) => {
                debug_assert_eq!(record.span, (0, self.topo.num_links()));
                self.ladders.remove(&id);
                self.record_success(now, oldest);
            }
            StageOutcome::Failed { survivors } => {
                // Lockstep mode has no use for partial results: the whole
                // batch is discarded and the cadence carries on.
                drop(survivors);
                self.ladders.remove(&id);
            }
        }
    }
}

impl Protocol for SynchronousChain {
    fn start(&mut self, engine: &mut Engine) {
        engine
            .schedule(SimTime::ZERO, EventKind::RoundStart { round: 0 })
            .expect("a fresh engine accepts t = 0");
    }

    fn on_event(&mut self, event: Event, engine: &mut Engine) {
        let now = event.fire_at;
        match event.kind {
            EventKind::RoundStart { round } => {
                self.round = round;
                self.stats.rounds += 1;
                self.statuses_in = 0;
                self.all_ok = true;
                debug_assert!(self.records.iter().all(Option::is_none));
                let emission = self.clocks.t_out_leg + self.clocks.t_one_link;
                for link in 0..self.topo.num_links() {
                    engine.schedule_in(emission, EventKind::EmitPhotons { link });
                }
                engine.schedule_in(
                    self.clocks.round,
                    EventKind::RoundStart { round: round + 1 },
                );
            }
            EventKind::EmitPhotons { link } => {
                self.stats.attempts_per_link[link as usize] += 1;
                self.emit_ok[link as usize] =
                    draw_emission(engine.rng(StreamId::link(link)), &self.params);
                self.records[link as usize] = Some(EntanglementRecord::elementary(
                    link,
                    now,
                    expiry_time(now, self.clocks.tau),
                ));
                engine.schedule_in(self.clocks.t_half_link, EventKind::PhotonAtBsm { link });
            }
            EventKind::PhotonAtBsm { link } => {
                let alive = self.records[link as usize]
                    .as_ref()
                    .expect("emission created a record")
                    .alive_at(now);
                let midpoint = draw_midpoint(
                    engine.rng(StreamId::link(link)),
                    &self.params,
                    self.clocks.half_link_km,
                );
                let success = self.emit_ok[link as usize] & midpoint & alive;
                if !success {
                    self.records[link as usize] = None;
                }
                engine.schedule_in(
                    self.clocks.t_half_link,
                    EventKind::BsmResult { link, success },
                );
            }
            EventKind::BsmResult { link, success } => {
                engine.schedule_in(
                    self.clocks.t_out_leg,
                    EventKind::ClassicalMessage {
                        message: Message::LinkStatus {
                            round: self.round,
                            link,
                            success,
                        },
                    },
                );
            }
            EventKind::ClassicalMessage {
                message: Message::LinkStatus { round, success, .. },
            } => {
                debug_assert_eq!(round, self.round, "statuses land before the next round");
                self.statuses_in += 1;
                self.all_ok &= success;
                if self.statuses_in == self.topo.num_links() {
                    self.finish_round(engine, now, round);
                }
            }
            EventKind::ClassicalMessage {
                message: Message::SwapStage { ladder, stage },
            } => {
                self.run_ladder_stage(engine, now, ladder, stage);
            }
            _ => debug_assert!(false, "unexpected event in lockstep mode: {:?}", event.kind),
        }
    }

    fn successes(&self) -> u64 {
        self.stats.successes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, StopCondition};

    fn forced() -> HardwareParams {
        HardwareParams {
            e_b: 1.0,
            e_s: 1.0,
            e_m: 1.0,
            e_d: 1.0,
            alpha_db_per_km: 0.0,
            v_km_per_s: 2e5,
            tau_mem_s: f64::INFINITY,
        }
    }

    fn run_chain(
        params: HardwareParams,
        length_km: f64,
        repeaters: u32,
        seed: u64,
        stop: StopCondition,
    ) -> TrialStats {
        let topo = ChainTopology::new(length_km, repeaters).unwrap();
        let mut engine = Engine::new(seed, topo.num_links() + 1);
        let mut chain = SynchronousChain::new(params, topo);
        let report = run(&mut engine, &mut chain, stop).unwrap();
        chain.finish(report.elapsed)
    }

    #[test]
    fn forced_success_ticks_every_round_no_repeater() {
        // 40 km at 2e5 km/s: round = 4L/v = 0.8 ms = 8e8 ticks.
        let stats = run_chain(forced(), 40.0, 0, 0, StopCondition::successes(5));
        let expect: Vec<SimTime> = (1..=5)
            .map(|k| SimTime::from_ticks(k * 800_000_000))
            .collect();
        assert_eq!(stats.success_times, expect);
        assert_eq!(stats.rate_per_s(), 1250.0);
        // Emission sits one pacing leg plus one link round-trip into the
        // round; the pair is 0.4 ms old when the statuses land.
        for age in &stats.oldest_age_samples {
            assert_eq!(*age, SimTime::from_ticks(400_000_000));
        }
    }

    #[test]
    fn forced_success_cadence_with_three_repeaters() {
        // ℓ = 10 km: round = (L + 3ℓ)/v = 0.35 ms; the two swap stages add
        // a further 2·(L/2v) = 0.2 ms after the statuses.
        let stats = run_chain(forced(), 40.0, 3, 0, StopCondition::successes(4));
        let first = SimTime::from_ticks(550_000_000);
        let period = SimTime::from_ticks(350_000_000);
        assert_eq!(stats.success_times[0], first);
        for pair in stats.success_times.windows(2) {
            assert_eq!(pair[1] - pair[0], period);
        }
        for age in &stats.oldest_age_samples {
            // out leg + ℓ/v + out leg is behind it, plus both stages.
            assert_eq!(*age, SimTime::from_ticks(375_000_000));
        }
        // Round 4 is already emitting (pipelined) when the fourth ladder
        // completes, so five rounds of attempts are on the books.
        assert_eq!(stats.attempts_per_link, alloc::vec![5, 5, 5, 5]);
    }

    #[test]
    fn per_round_success_frequency_matches_the_single_attempt_probability() {
        // 50 km, no repeater, infinite memory: p = 0.02592 per round.
        let stats = run_chain(
            HardwareParams::default(),
            50.0,
            0,
            1,
            StopCondition::sim_time(SimTime::from_secs(30.0)),
        );
        // Round = 1 ms: rounds at 0, 1 ms, …, 30 s inclusive; the final
        // round's emission lies past the horizon.
        assert_eq!(stats.rounds, 30_001);
        assert_eq!(stats.total_attempts(), 30_000);
        let p = 0.02592;
        let n = stats.total_attempts() as f64;
        let tolerance = 3.0 * (p * (1.0 - p) * n).sqrt();
        assert!(
            (stats.successes as f64 - p * n).abs() < tolerance,
            "successes {} outside {} ± {}",
            stats.successes,
            p * n,
            tolerance
        );
    }

    #[test]
    fn memory_lifetime_gates_the_swap_ladder() {
        let params = HardwareParams::default().with_tau_mem_s(1e-3);
        // Memories must live (L + ℓ)/(2v) + ℓ/v + L/(2v) = 7L/(4v) from
        // emission to the single swap stage; at 2e5 km/s and τ = 1 ms the
        // ladder is reachable only below ≈ 114 km.
        let dead = run_chain(
            params,
            120.0,
            1,
            2,
            StopCondition::sim_time(SimTime::from_secs(20.0)),
        );
        assert_eq!(dead.successes, 0);
        assert!(dead.total_attempts() > 20_000);

        let alive = run_chain(
            params,
            80.0,
            1,
            2,
            StopCondition::sim_time(SimTime::from_secs(20.0)),
        );
        assert!(alive.successes > 0, "80 km sits inside the lifetime budget");
    }

    #[test]
    fn failed_swap_heralds_discard_the_whole_batch() {
        let mut params = forced();
        params.e_s = 0.0;
        let stats = run_chain(
            params,
            40.0,
            1,
            3,
            StopCondition::either(1, SimTime::from_secs(0.1)),
        );
        // Every round goes green, every ladder fails at its only stage.
        assert_eq!(stats.successes, 0);
        assert!(stats.rounds > 100);
        // The horizon cuts the last started round before its emissions.
        assert_eq!(stats.total_attempts(), (stats.rounds - 1) * 2);
    }
}
