//! Machine-readable verification records.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    /// Which result the check exercises, or `plumbing`.
    pub reference: String,
    #[serde(with = "crate::json::float")]
    pub residual: f64,
    #[serde(with = "crate::json::float")]
    pub tolerance: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl CheckRecord {
    /// Passes iff `residual < tolerance`; NaN fails.
    pub fn residual(id: impl Into<String>, reference: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let status = if residual < tolerance { Status::Pass } else { Status::Fail };
        Self {
            id: id.into(),
            reference: reference.into(),
            residual,
            tolerance,
            status,
            detail: None,
            wall_time_ms: None,
        }
    }

    /// Passes iff `ok`; the residual records the number of offending cases.
    pub fn boolean(id: impl Into<String>, reference: impl Into<String>, ok: bool, offending: usize) -> Self {
        let mut r = Self::residual(id, reference, offending as f64, 0.5);
        r.status = if ok { Status::Pass } else { Status::Fail };
        r
    }

    pub fn error(id: impl Into<String>, reference: impl Into<String>, err: impl fmt::Display) -> Self {
        Self {
            id: id.into(),
            reference: reference.into(),
            residual: f64::NAN,
            tolerance: 0.0,
            status: Status::Fail,
            detail: Some(err.to_string()),
            wall_time_ms: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn push(&mut self, r: CheckRecord) {
        self.checks.push(r);
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = CheckRecord>) {
        self.checks.extend(rs);
    }

    pub fn count(&self, status: Status) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    /// No check failed; inconclusive checks do not count as failures.
    pub fn passed(&self) -> bool {
        self.count(Status::Fail) == 0
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// One line per check: status, id, residual and tolerance.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<12} {:<48} residual={:.3e} tol={:.1e}{}\n",
                c.status.to_string(),
                c.id,
                c.residual,
                c.tolerance,
                c.detail.as_ref().map(|d| format!("  ({d})")).unwrap_or_default()
            ));
        }
        out.push_str(&format!(
            "{} pass, {} fail, {} inconclusive\n",
            self.count(Status::Pass),
            self.count(Status::Fail),
            self.count(Status::Inconclusive)
        ));
        out
    }
}
