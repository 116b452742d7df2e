//! Run configuration: a JSON file plus command-line overrides.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Result, TodaError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    #[serde(with = "crate::json::float")]
    pub degeneracy: f64,
    #[serde(with = "crate::json::float")]
    pub rank: f64,
    #[serde(with = "crate::json::float")]
    pub bracket: f64,
    #[serde(with = "crate::json::float")]
    pub ode_rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            degeneracy: 1e-8,
            rank: 1e-7,
            bracket: 1e-7,
            ode_rtol: 1e-10,
        }
    }
}

/// Groups of checks run by `verify`.
pub const SUITES: [&str; 5] = ["lax", "spectral", "dynamics", "singularity", "maslov"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    /// Random points per particle count for the sampled checks.
    pub random_points: usize,
    /// Initial samples on every closed curve.
    pub loop_samples: usize,
    /// Length of the integrated flows.
    #[serde(with = "crate::json::float")]
    pub t_final: f64,
    pub tolerances: Tolerances,
    /// Subset of [`SUITES`]; empty means all.
    pub suites: Vec<String>,
    pub out: Option<PathBuf>,
    /// Record wall time per check (breaks byte-identical reports).
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_min: 2,
            n_max: 5,
            seed: 42,
            random_points: 200,
            loop_samples: 128,
            t_final: 50.0,
            tolerances: Tolerances::default(),
            suites: Vec::new(),
            out: None,
            timing: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            TodaError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TodaError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            TodaError::Config(m) => TodaError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("degeneracy", t.degeneracy),
            ("rank", t.rank),
            ("bracket", t.bracket),
            ("ode_rtol", t.ode_rtol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TodaError::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if self.n_min < 2 || self.n_min > self.n_max || self.n_max > 16 {
            return Err(TodaError::Config(format!(
                "particle range {}..={} must satisfy 2 <= n_min <= n_max <= 16",
                self.n_min, self.n_max
            )));
        }
        if self.loop_samples < 8 {
            return Err(TodaError::Config("loop_samples must be at least 8".into()));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(TodaError::Config("t_final must be positive".into()));
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(TodaError::Config(format!(
                    "unknown suite {s:?}; expected one of {}",
                    SUITES.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn runs(&self, suite: &str) -> bool {
        self.suites.is_empty() || self.suites.iter().any(|s| s == suite)
    }

    pub fn particle_counts(&self) -> std::ops::RangeInclusive<usize> {
        self.n_min..=self.n_max
    }
}
