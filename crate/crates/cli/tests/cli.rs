//! End-to-end checks of the `repchain` binary: exit codes, diagnostics and
//! byte-stable output.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn repchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repchain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

/// A grid small enough that every invocation in this file finishes in well
/// under a second.
const TINY_SWEEP: &str = "\
[sweep]
l_km = 1, 2
repeaters = 0
max_successes = 50
max_sim_time_s = 0.05
master_seed = 7
";

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("sweep.cfg");
    fs::write(&path, text).expect("config written");
    path.to_str().expect("UTF-8 path").to_string()
}

#[test]
fn missing_config_file_exits_with_code_two() {
    let out = repchain(&["sweep", "--config", "/nonexistent/sweep.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config error"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_reported_with_its_line_number() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = write_config(dir.path(), "[sweep]\nl_km = 10\nloss_db = 3\n");
    let out = repchain(&["sweep", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("loss_db"), "{msg}");
}

#[test]
fn malformed_value_is_reported_with_its_line_number() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = write_config(dir.path(), "[params]\ne_b = often\n");
    let out = repchain(&["sweep", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 2"), "{msg}");
    assert!(msg.contains("often"), "{msg}");
}

#[test]
fn unknown_flag_exits_with_code_two() {
    let out = repchain(&["rate", "--l-km", "10", "--fidelity", "0.9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_output_is_byte_identical_across_reruns_and_thread_counts() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = write_config(dir.path(), TINY_SWEEP);
    let first = repchain(&["sweep", "--config", &path]);
    assert!(first.status.success(), "{}", stderr(&first));
    let again = repchain(&["sweep", "--config", &path]);
    let threaded = repchain(&["sweep", "--config", &path, "--threads", "4"]);
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(first.stdout, threaded.stdout);

    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "header plus one row per grid point");
    assert_eq!(
        lines[0],
        "L_km,r,tau_mem_s,protocol,rate_sim_per_s,rate_sim_stderr,\
         rate_model_per_s,rel_dev,mean_dt_s,successes,seed"
    );
    for row in &lines[1..] {
        assert_eq!(row.split(',').count(), 11, "{row}");
    }
}

#[test]
fn sweep_writes_the_same_bytes_to_a_file_as_to_stdout() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = write_config(dir.path(), TINY_SWEEP);
    let on_stdout = repchain(&["sweep", "--config", &path]);
    let out_path = dir.path().join("rows.csv");
    let to_file = repchain(&[
        "sweep",
        "--config",
        &path,
        "--out",
        out_path.to_str().expect("UTF-8 path"),
    ]);
    assert!(to_file.status.success(), "{}", stderr(&to_file));
    assert!(to_file.stdout.is_empty());
    let written = fs::read(&out_path).expect("CSV written");
    assert_eq!(written, on_stdout.stdout);
}

#[test]
fn seed_flag_overrides_the_master_seed() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = write_config(dir.path(), TINY_SWEEP);
    let base = repchain(&["sweep", "--config", &path]);
    let same = repchain(&["sweep", "--config", &path, "--seed", "7"]);
    let other = repchain(&["sweep", "--config", &path, "--seed", "8"]);
    assert_eq!(base.stdout, same.stdout);
    assert_ne!(base.stdout, other.stdout);
}

#[test]
fn rate_emits_a_header_and_one_row() {
    let out = repchain(&[
        "rate",
        "--l-km",
        "2",
        "--max-successes",
        "100",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "2");
    assert_eq!(fields[3], "synchronous");
    assert_eq!(fields[9], "100");
    assert_eq!(fields[10], "5");
}

#[test]
fn analytic_value_matches_the_library_exactly() {
    let out = repchain(&["analytic", "--model", "no-repeater", "--l-km", "50"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let printed: f64 = stdout(&out).trim().parse().expect("a number");
    let expected =
        repchain_core::analytics::rate_no_repeater(&repchain_core::HardwareParams::default(), 50.0);
    assert_eq!(printed.to_bits(), expected.to_bits());
    assert!((printed - 25.92).abs() < 1e-9);
}

#[test]
fn analytic_rejects_bad_parameters_with_code_two() {
    let out = repchain(&[
        "analytic",
        "--model",
        "no-repeater",
        "--l-km",
        "50",
        "--e-b",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let negative_length = repchain(&["analytic", "--model", "p-single", "--l-km", "-3"]);
    assert_eq!(negative_length.status.code(), Some(2));
}

#[test]
fn trace_lines_are_tab_separated_events_in_time_order() {
    let out = repchain(&[
        "trace",
        "--l-km",
        "2",
        "--seed",
        "5",
        "--max-successes",
        "3",
        "--max-sim-time-s",
        "0.05",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(!text.is_empty());
    let mut last_tick = 0u64;
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line}");
        let tick: u64 = fields[0].parse().expect("tick count");
        assert!(tick >= last_tick, "out of order: {line}");
        last_tick = tick;
        assert!(
            [
                "RoundStart",
                "EmitPhotons",
                "PhotonAtBSM",
                "BSMResult",
                "ClassicalMessage"
            ]
            .contains(&fields[1]),
            "{line}"
        );
    }
}

#[test]
fn mu_table_has_one_row_per_link_count() {
    let out = repchain(&["mu", "--n", "1..4", "--reps", "20000", "--seed", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n\tmu\tmu_over_sqrt_n\tstddev_norm");
    assert_eq!(lines.len(), 5);
    let first: Vec<&str> = lines[1].split('\t').collect();
    let mu1: f64 = first[1].parse().expect("a number");
    assert!((mu1 - 1.0).abs() < 0.05, "mu(1) ~ 1, got {mu1}");
}
