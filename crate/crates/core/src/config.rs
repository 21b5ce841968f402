//! Flat `key = value` experiment configuration with `#` comments.
//! The thread count can additionally be overridden through the
//! KDISC_THREADS environment variable (highest precedence).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "KDISC_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Budget for aggregate scans, in inner-loop terms.
    pub term_budget: u64,
    /// Largest X accepted by point-set generation.
    pub point_cap: u64,
    /// Cap for the certified exact-small box discrepancy.
    pub exact_small_cap: usize,
    /// Worker threads for parallel scans; 0 means "number of cores".
    pub threads: usize,
    /// Seed for all randomized corpora (baseline sets, polygon corpus).
    pub seed: u64,
    /// Directory for CSV/SVG/JSON artifacts.
    pub output_dir: PathBuf,
    /// Relative tolerance for float cross-checks (keystone identity,
    /// batched-vs-per-pair consistency).
    pub rel_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            term_budget: crate::aggregate::DEFAULT_TERM_BUDGET,
            point_cap: crate::pointset::DEFAULT_POINT_CAP,
            exact_small_cap: crate::discrepancy::DEFAULT_EXACT_SMALL_CAP,
            threads: 0,
            seed: 1,
            output_dir: PathBuf::from("out"),
            rel_tolerance: 1e-6,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.apply_env();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| {
                Error::Config(format!("line {}: bad value for {key}: {e}", lineno + 1))
            };
            match key {
                "term_budget" => cfg.term_budget = value.parse().map_err(|e| bad(&e))?,
                "point_cap" => cfg.point_cap = value.parse().map_err(|e| bad(&e))?,
                "exact_small_cap" => cfg.exact_small_cap = value.parse().map_err(|e| bad(&e))?,
                "threads" => cfg.threads = value.parse().map_err(|e| bad(&e))?,
                "seed" => cfg.seed = value.parse().map_err(|e| bad(&e))?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "rel_tolerance" => cfg.rel_tolerance = value.parse().map_err(|e| bad(&e))?,
                other => {
                    return Err(Error::Config(format!("line {}: unknown key {other}", lineno + 1)))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            if let Ok(t) = v.trim().parse() {
                self.threads = t;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.term_budget == 0 || self.point_cap == 0 || self.exact_small_cap == 0 {
            return Err(Error::Config("budgets and caps must be positive".into()));
        }
        if !(self.rel_tolerance >= f64::EPSILON) {
            return Err(Error::Config(format!(
                "rel_tolerance {} below machine epsilon",
                self.rel_tolerance
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# experiment\nterm_budget = 500\n point_cap=700 # inline\n\nseed = 42\noutput_dir = /tmp/x\nrel_tolerance = 1e-9\n",
        )
        .unwrap();
        assert_eq!(cfg.term_budget, 500);
        assert_eq!(cfg.point_cap, 700);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.rel_tolerance, 1e-9);
        // untouched keys keep defaults
        assert_eq!(cfg.exact_small_cap, crate::discrepancy::DEFAULT_EXACT_SMALL_CAP);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(ExperimentConfig::parse("nonsense"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("mystery = 3"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("seed = abc"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("term_budget = 0"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::parse("rel_tolerance = 1e-30"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn missing_file_is_config_error() {
        assert!(matches!(
            ExperimentConfig::from_file(Path::new("/nonexistent/kdisc.conf")),
            Err(Error::Config(_))
        ));
    }
}
