//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! Blank lines and lines starting with `#` or `;` are ignored.  A
//! `[section]` line opens one of `[params]`, `[sweep]` or `[output]`;
//! every other line must read `key = value`.  Unknown sections or keys,
//! duplicate keys and malformed values are rejected with the offending
//! line number.  Physical quantities carry their unit in the key name
//! (`l_km`, `tau_mem_ms`, `max_sim_time_s`, `v_km_per_s`) so a file can't
//! silently mix scales; values are kept in their configured units so the
//! canonical text form round-trips exactly.

use std::collections::BTreeSet;
#[cfg(test)]
use std::fmt::Write as _;
use std::path::PathBuf;

use repchain_core::analytics::MuSource;
use repchain_core::simulation::{ProtocolKind, StopCondition, SweepSpec};
use repchain_core::{HardwareParams, SimTime};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value` or `[section]`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown section `[{name}]` (expected params, sweep or output)")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: key `{key}` appears before any `[section]` header")]
    KeyOutsideSection { line: usize, key: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        section: &'static str,
        key: String,
    },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey {
        line: usize,
        section: &'static str,
        key: String,
    },
    #[error("line {line}: key `{key}`: {problem}, got `{value}`")]
    BadValue {
        line: usize,
        key: String,
        problem: &'static str,
        value: String,
    },
}

/// Where the independent-scheme model's max-of-N correction comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuMode {
    MonteCarlo,
    SqrtApprox,
}

/// The `[sweep]` section: grid axes, protocol, stop rule and model knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub l_km: Vec<f64>,
    pub repeaters: Vec<u32>,
    pub tau_mem_ms: Vec<f64>,
    pub protocol: ProtocolKind,
    pub partial_discard: bool,
    pub max_successes: Option<u64>,
    pub max_sim_time_s: Option<f64>,
    pub master_seed: u64,
    pub mu_mode: MuMode,
    pub mu_p1: f64,
    pub mu_reps: u64,
    pub mu_seed: u64,
}

impl Default for SweepSettings {
    fn default() -> SweepSettings {
        SweepSettings {
            l_km: vec![50.0],
            repeaters: vec![0],
            tau_mem_ms: vec![f64::INFINITY],
            protocol: ProtocolKind::Synchronous,
            partial_discard: false,
            max_successes: Some(10_000),
            max_sim_time_s: Some(1_000.0),
            master_seed: 1,
            mu_mode: MuMode::MonteCarlo,
            mu_p1: 1e-3,
            mu_reps: 1_000_000,
            mu_seed: 0,
        }
    }
}

/// The `[output]` section.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputSettings {
    /// CSV destination; stdout when absent.
    pub csv: Option<PathBuf>,
}

/// A parsed configuration file.  Hardware values live here in their
/// configured units; [`hardware_params`](RunConfig::hardware_params)
/// converts to the simulator's units.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub e_b: f64,
    pub e_s: f64,
    pub e_m: f64,
    pub e_d: f64,
    pub alpha_db_per_km: f64,
    pub v_km_per_s: f64,
    pub tau_mem_ms: f64,
    pub sweep: SweepSettings,
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        let p = HardwareParams::default();
        RunConfig {
            e_b: p.e_b,
            e_s: p.e_s,
            e_m: p.e_m,
            e_d: p.e_d,
            alpha_db_per_km: p.alpha_db_per_km,
            v_km_per_s: p.v_km_per_s,
            tau_mem_ms: f64::INFINITY,
            sweep: SweepSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn hardware_params(&self) -> HardwareParams {
        HardwareParams {
            e_b: self.e_b,
            e_s: self.e_s,
            e_m: self.e_m,
            e_d: self.e_d,
            alpha_db_per_km: self.alpha_db_per_km,
            v_km_per_s: self.v_km_per_s,
            tau_mem_s: self.tau_mem_ms * 1e-3,
        }
    }

    pub fn stop_condition(&self) -> StopCondition {
        StopCondition {
            max_successes: self.sweep.max_successes,
            max_sim_time: self.sweep.max_sim_time_s.map(SimTime::from_secs),
        }
    }

    pub fn mu_source(&self) -> MuSource {
        match self.sweep.mu_mode {
            MuMode::MonteCarlo => MuSource::MonteCarlo {
                p1: self.sweep.mu_p1,
                repetitions: self.sweep.mu_reps,
                seed: self.sweep.mu_seed,
            },
            MuMode::SqrtApprox => MuSource::SqrtApprox,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            params: self.hardware_params(),
            lengths_km: self.sweep.l_km.clone(),
            repeater_counts: self.sweep.repeaters.clone(),
            tau_mem_s: self.sweep.tau_mem_ms.iter().map(|ms| ms * 1e-3).collect(),
            protocol: self.sweep.protocol,
            partial_discard: self.sweep.partial_discard,
            stop: self.stop_condition(),
            master_seed: self.sweep.master_seed,
            mu_source: self.mu_source(),
        }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section: Option<&'static str> = None;
    let mut seen: BTreeSet<(&'static str, String)> = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: trimmed.to_string(),
                });
            };
            section = Some(match name.trim() {
                "params" => "params",
                "sweep" => "sweep",
                "output" => "output",
                other => {
                    return Err(ConfigError::UnknownSection {
                        line,
                        name: other.to_string(),
                    })
                }
            });
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::Malformed {
                line,
                text: trimmed.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(ConfigError::Malformed {
                line,
                text: trimmed.to_string(),
            });
        }
        let Some(section) = section else {
            return Err(ConfigError::KeyOutsideSection {
                line,
                key: key.to_string(),
            });
        };
        if !seen.insert((section, key.to_string())) {
            return Err(ConfigError::DuplicateKey {
                line,
                section,
                key: key.to_string(),
            });
        }
        apply(&mut cfg, section, key, value, line)?;
    }
    Ok(cfg)
}

fn apply(
    cfg: &mut RunConfig,
    section: &'static str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    match (section, key) {
        ("params", "e_b") => cfg.e_b = f64_value(key, value, line)?,
        ("params", "e_s") => cfg.e_s = f64_value(key, value, line)?,
        ("params", "e_m") => cfg.e_m = f64_value(key, value, line)?,
        ("params", "e_d") => cfg.e_d = f64_value(key, value, line)?,
        ("params", "alpha_db_per_km") => cfg.alpha_db_per_km = f64_value(key, value, line)?,
        ("params", "v_km_per_s") => cfg.v_km_per_s = f64_value(key, value, line)?,
        ("params", "tau_mem_ms") => cfg.tau_mem_ms = f64_value(key, value, line)?,
        ("sweep", "l_km") => cfg.sweep.l_km = f64_list(key, value, line)?,
        ("sweep", "repeaters") => cfg.sweep.repeaters = u32_list(key, value, line)?,
        ("sweep", "tau_mem_ms") => cfg.sweep.tau_mem_ms = f64_list(key, value, line)?,
        ("sweep", "protocol") => {
            cfg.sweep.protocol = match value {
                "synchronous" => ProtocolKind::Synchronous,
                "independent" => ProtocolKind::Independent,
                _ => {
                    return Err(bad(
                        key,
                        value,
                        line,
                        "expected `synchronous` or `independent`",
                    ))
                }
            }
        }
        ("sweep", "partial_discard") => {
            cfg.sweep.partial_discard = match value {
                "true" => true,
                "false" => false,
                _ => return Err(bad(key, value, line, "expected `true` or `false`")),
            }
        }
        ("sweep", "max_successes") => {
            cfg.sweep.max_successes = match value {
                "none" => None,
                _ => Some(u64_value(key, value, line)?),
            }
        }
        ("sweep", "max_sim_time_s") => {
            cfg.sweep.max_sim_time_s = match value {
                "none" => None,
                _ => Some(f64_value(key, value, line)?),
            }
        }
        ("sweep", "master_seed") => cfg.sweep.master_seed = u64_value(key, value, line)?,
        ("sweep", "mu_mode") => {
            cfg.sweep.mu_mode = match value {
                "mc" => MuMode::MonteCarlo,
                "sqrt" => MuMode::SqrtApprox,
                _ => return Err(bad(key, value, line, "expected `mc` or `sqrt`")),
            }
        }
        ("sweep", "mu_p1") => cfg.sweep.mu_p1 = f64_value(key, value, line)?,
        ("sweep", "mu_reps") => cfg.sweep.mu_reps = u64_value(key, value, line)?,
        ("sweep", "mu_seed") => cfg.sweep.mu_seed = u64_value(key, value, line)?,
        ("output", "csv") => cfg.output.csv = Some(PathBuf::from(value)),
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                section,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

fn bad(key: &str, value: &str, line: usize, problem: &'static str) -> ConfigError {
    ConfigError::BadValue {
        line,
        key: key.to_string(),
        problem,
        value: value.to_string(),
    }
}

/// Floats accept `inf`/`infinity` (any case); NaN is rejected.
fn f64_value(key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
    let lower = value.to_ascii_lowercase();
    if lower == "inf" || lower == "infinity" || lower == "+inf" {
        return Ok(f64::INFINITY);
    }
    match value.parse::<f64>() {
        Ok(v) if v.is_nan() => Err(bad(key, value, line, "expected a number")),
        Ok(v) => Ok(v),
        Err(_) => Err(bad(key, value, line, "expected a number")),
    }
}

/// Integers also accept exponent notation (`1e6`) when it is exact.
fn u64_value(key: &str, value: &str, line: usize) -> Result<u64, ConfigError> {
    if let Ok(v) = value.parse::<u64>() {
        return Ok(v);
    }
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= (1u64 << 53) as f64 => {
            Ok(v as u64)
        }
        _ => Err(bad(key, value, line, "expected a non-negative integer")),
    }
}

fn f64_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|item| f64_value(key, item.trim(), line))
        .collect()
}

fn u32_list(key: &str, value: &str, line: usize) -> Result<Vec<u32>, ConfigError> {
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<u32>()
                .map_err(|_| bad(key, item.trim(), line, "expected a non-negative integer"))
        })
        .collect()
}

#[cfg(test)]
fn join_f64(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{v}");
    }
    s
}

#[cfg(test)]
fn join_u32(values: &[u32]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Canonical text form; [`parse`] of the result reproduces the config
/// exactly (float values print in shortest round-trip form, infinity as
/// `inf`).
#[cfg(test)]
pub fn serialize(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[params]");
    let _ = writeln!(s, "e_b = {}", cfg.e_b);
    let _ = writeln!(s, "e_s = {}", cfg.e_s);
    let _ = writeln!(s, "e_m = {}", cfg.e_m);
    let _ = writeln!(s, "e_d = {}", cfg.e_d);
    let _ = writeln!(s, "alpha_db_per_km = {}", cfg.alpha_db_per_km);
    let _ = writeln!(s, "v_km_per_s = {}", cfg.v_km_per_s);
    let _ = writeln!(s, "tau_mem_ms = {}", cfg.tau_mem_ms);
    let _ = writeln!(s);
    let _ = writeln!(s, "[sweep]");
    let _ = writeln!(s, "l_km = {}", join_f64(&cfg.sweep.l_km));
    let _ = writeln!(s, "repeaters = {}", join_u32(&cfg.sweep.repeaters));
    let _ = writeln!(s, "tau_mem_ms = {}", join_f64(&cfg.sweep.tau_mem_ms));
    let _ = writeln!(s, "protocol = {}", cfg.sweep.protocol);
    let _ = writeln!(s, "partial_discard = {}", cfg.sweep.partial_discard);
    match cfg.sweep.max_successes {
        Some(n) => {
            let _ = writeln!(s, "max_successes = {n}");
        }
        None => {
            let _ = writeln!(s, "max_successes = none");
        }
    }
    match cfg.sweep.max_sim_time_s {
        Some(t) => {
            let _ = writeln!(s, "max_sim_time_s = {t}");
        }
        None => {
            let _ = writeln!(s, "max_sim_time_s = none");
        }
    }
    let _ = writeln!(s, "master_seed = {}", cfg.sweep.master_seed);
    let _ = writeln!(
        s,
        "mu_mode = {}",
        match cfg.sweep.mu_mode {
            MuMode::MonteCarlo => "mc",
            MuMode::SqrtApprox => "sqrt",
        }
    );
    let _ = writeln!(s, "mu_p1 = {}", cfg.sweep.mu_p1);
    let _ = writeln!(s, "mu_reps = {}", cfg.sweep.mu_reps);
    let _ = writeln!(s, "mu_seed = {}", cfg.sweep.mu_seed);
    if let Some(csv) = &cfg.output.csv {
        let _ = writeln!(s);
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "csv = {}", csv.display());
    }
    s
}
