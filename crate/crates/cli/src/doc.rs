//! JSON document types shared by the subcommands. Field order is part of
//! the output contract: serialization is deterministic for fixed inputs.

use finsler_core::MetricSpec;
use serde::Serialize;

pub const SCHEMA: &str = "finsler-nullity/1";

#[derive(Serialize)]
pub struct ErrorDoc {
    pub schema: &'static str,
    pub error: ErrorBody,
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

impl ErrorDoc {
    pub fn new(kind: &str, message: String) -> Self {
        ErrorDoc {
            schema: SCHEMA,
            error: ErrorBody {
                kind: kind.to_string(),
                message,
            },
        }
    }
}

/// One residual-style check: every pass/fail carries the numeric residual
/// and the tolerance that was applied.
#[derive(Serialize, Clone)]
pub struct CheckRow {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<String>,
}

#[derive(Serialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl CheckRow {
    pub fn residual(name: &str, k: Option<f64>, residual: f64, tolerance: f64) -> Self {
        CheckRow {
            name: name.to_string(),
            k,
            residual: Some(residual),
            tolerance: Some(tolerance),
            status: if residual < tolerance {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            details: None,
        }
    }

    pub fn boolean(name: &str, k: Option<f64>, pass: bool, details: Option<String>) -> Self {
        CheckRow {
            name: name.to_string(),
            k,
            residual: None,
            tolerance: None,
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            details,
        }
    }

    pub fn skipped(name: &str, k: Option<f64>, why: &str) -> Self {
        CheckRow {
            name: name.to_string(),
            k,
            residual: None,
            tolerance: None,
            status: CheckStatus::Skipped,
            details: Some(why.to_string()),
        }
    }

}

#[derive(Serialize)]
pub struct Metadata {
    pub metric: MetricSpec,
    pub version: &'static str,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl Summary {
    pub fn of(checks: &[CheckRow]) -> Summary {
        Summary {
            total: checks.len(),
            passed: checks.iter().filter(|c| c.status == CheckStatus::Pass).count(),
            failed: checks.iter().filter(|c| c.status == CheckStatus::Fail).count(),
            skipped: checks
                .iter()
                .filter(|c| c.status == CheckStatus::Skipped)
                .count(),
        }
    }
}
