//! CSV and event-trace emission.
//!
//! Real columns print with `{}` (shortest round-trip form), so every value
//! parses back to the exact in-memory bits; infinities render as `inf` and
//! an undefined standard error as `NaN`.  Lines end with `\n`.

use std::io::{self, Write};

use repchain_core::engine::Event;
use repchain_core::simulation::PointResult;

pub const CSV_HEADER: &str = "L_km,r,tau_mem_s,protocol,rate_sim_per_s,rate_sim_stderr,\
rate_model_per_s,rel_dev,mean_dt_s,successes,seed";

pub fn csv_row(row: &PointResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        row.length_km,
        row.repeaters,
        row.tau_mem_s,
        row.protocol,
        row.rate_sim_per_s,
        row.rate_sim_stderr,
        row.rate_model_per_s,
        row.rel_dev,
        row.mean_dt_s,
        row.successes,
        row.seed,
    )
}

/// Header plus one line per row; a rowless sweep leaves a header-only file.
pub fn write_csv(mut w: impl Write, rows: &[PointResult]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", csv_row(row))?;
    }
    Ok(())
}

/// One trace line per dispatched event: fire tick, kind, payload,
/// tab-separated.
pub fn trace_line(event: &Event) -> String {
    format!(
        "{}\t{}\t{}",
        event.fire_at.ticks(),
        event.kind.name(),
        event.kind
    )
}
