//! File formats: configuration and belief files (TOML or JSON, chosen by
//! extension), tidy CSV tables and JSON summaries.
//!
//! Numbers are written with 9 significant digits so that output files are
//! stable at the string level.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analytics::BeliefModel;
use crate::config::SimConfig;
use crate::error::{IoError, MetricsError};
use crate::metrics::{normalized_rewards, NormalizedRow};
use crate::simulator::ExperimentRecord;

pub const ROUNDS_HEADER: &str = "round,strategy,mechanism,mean_reward,normalized_reward,budget";
pub const FIGURE1_HEADER: &str = "round,k,strategy,curve,normalized_reward";

/// `x` with 9 significant digits, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Fs { path: path.display().to_string(), source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Fs { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| IoError::Fs { path: path.display().to_string(), source })
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, IoError> {
    let parse_err = |message: String| IoError::Parse { path: path.display().to_string(), message };
    if is_json(path) {
        serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| parse_err(e.to_string()))
    }
}

/// Reads a configuration; `.json` files are JSON, anything else TOML.
pub fn load_config(path: &Path) -> Result<SimConfig, IoError> {
    parse(path, &read(path)?)
}

pub fn config_to_toml(cfg: &SimConfig) -> Result<String, IoError> {
    toml::to_string_pretty(cfg).map_err(|e| IoError::Serialize(e.to_string()))
}

pub fn config_from_toml(text: &str) -> Result<SimConfig, IoError> {
    toml::from_str(text).map_err(|e| IoError::Parse { path: "<string>".into(), message: e.to_string() })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String, IoError> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| IoError::Serialize(e.to_string()))
}

/// Belief file for the closed-form report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefsFile {
    #[serde(flatten)]
    pub beliefs: BeliefModel,
    #[serde(default = "default_cost_high")]
    pub cost_high: f64,
    #[serde(default)]
    pub cost_low: f64,
    #[serde(default = "default_max_k")]
    pub max_k: u32,
}

fn default_cost_high() -> f64 {
    1.0
}

fn default_max_k() -> u32 {
    8
}

pub fn load_beliefs(path: &Path) -> Result<BeliefsFile, IoError> {
    let file: BeliefsFile = parse(path, &read(path)?)?;
    file.beliefs.validate()?;
    Ok(file)
}

/// Per-round, per-strategy table of mean and normalized rewards.
pub fn rounds_csv(record: &ExperimentRecord, optimal: f64) -> Result<String, MetricsError> {
    let rows = normalized_rewards(record, optimal)?;
    let mechanism = record.config.mechanism.name.as_str();
    let mut out = String::with_capacity(64 * rows.len());
    out.push_str(ROUNDS_HEADER);
    out.push('\n');
    for (row, budget) in rows.iter().map(|r| (r, record.ledgers[r.round as usize].budget)) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.round,
            row.strategy,
            mechanism,
            fmt_num(row.mean_reward),
            fmt_num(row.normalized),
            fmt_num(budget)
        );
    }
    Ok(out)
}

/// Long-format table with one row per round, k, strategy and curve.
/// `reform` pairs each k with its normalized rows; `baseline` is repeated
/// under every k.
pub fn figure1_csv(reform: &[(u32, Vec<NormalizedRow>)], baseline: &[NormalizedRow]) -> String {
    let mut out = String::new();
    out.push_str(FIGURE1_HEADER);
    out.push('\n');
    for (k, rows) in reform {
        for row in rows {
            let base = baseline.iter().find(|b| b.round == row.round && b.strategy == row.strategy);
            let _ = writeln!(out, "{},{},{},N-REFORM,{}", row.round, k, row.strategy, fmt_num(row.normalized));
            if let Some(b) = base {
                let _ = writeln!(out, "{},{},{},N-RPTSC,{}", b.round, k, b.strategy, fmt_num(b.normalized));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.5), "1.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(-21.999999999), "-22");
        assert_eq!(fmt_num(123456789.4), "123456789");
        assert_eq!(fmt_num(1e20), "1.00000000e20");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn beliefs_file_defaults() {
        let text = "prior = [0.5, 0.5]\nposterior = [[0.9, 0.1], [0.1, 0.9]]\nr = 0.5\nn = 10\nalpha = 2.0\n";
        let f: BeliefsFile = toml::from_str(text).unwrap();
        assert_eq!(f.cost_high, 1.0);
        assert_eq!(f.max_k, 8);
        assert_eq!(f.beliefs.beta, 1.0);
    }

    proptest! {
        #[test]
        fn rounding_keeps_nine_digits(x in -1e12f64..1e12) {
            let y = round_sig(x);
            prop_assert!((x - y).abs() <= 5e-9 * x.abs().max(1e-300) + 1e-300);
            prop_assert_eq!(round_sig(y), y);
        }
    }
}
