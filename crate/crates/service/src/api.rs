//! Request and response payloads. Dose numbers are one-based throughout.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use boin_core::{BoundaryRow, Decision, DesignSpec, EliminationRule, HypothesisPriors, TieRule};
use boin_designs::DecisionRecord;

use crate::error::{ApiError, ApiResult};

pub const SCHEMA_VERSION: u32 = 1;

pub(crate) fn check_schema(version: u32) -> ApiResult<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(ApiError::validation(
            "schema_version",
            format!("unsupported schema_version {version}; this service speaks {SCHEMA_VERSION}"),
        ))
    }
}

/// Design parameters; anything omitted takes the recommended default for
/// the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecInput {
    pub phi: f64,
    pub phi1: Option<f64>,
    pub phi2: Option<f64>,
    pub num_doses: Option<usize>,
    pub max_sample: Option<u32>,
    pub cohort_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub priors: Vec<HypothesisPriors>,
    pub elimination: Option<EliminationRule>,
    #[serde(default)]
    pub no_elimination: bool,
}

impl SpecInput {
    pub fn target(phi: f64) -> Self {
        SpecInput {
            phi,
            phi1: None,
            phi2: None,
            num_doses: None,
            max_sample: None,
            cohort_size: None,
            priors: Vec::new(),
            elimination: None,
            no_elimination: false,
        }
    }

    pub fn build(&self) -> ApiResult<DesignSpec> {
        let mut spec = DesignSpec::with_target(self.phi);
        spec.phi1 = self.phi1.unwrap_or(spec.phi1);
        spec.phi2 = self.phi2.unwrap_or(spec.phi2);
        spec.num_doses = self.num_doses.unwrap_or(spec.num_doses);
        spec.max_sample = self.max_sample.unwrap_or(spec.max_sample);
        spec.cohort_size = self.cohort_size.unwrap_or(spec.cohort_size);
        spec.priors = self.priors.clone();
        if self.no_elimination {
            if self.elimination.is_some() {
                return Err(ApiError::validation("elimination", "conflicts with no_elimination"));
            }
            spec.elimination = None;
        } else if let Some(rule) = self.elimination {
            spec.elimination = Some(rule);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub schema_version: u32,
    pub design: String,
    pub spec: SpecInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortInput {
    pub schema_version: u32,
    pub dose: usize,
    pub toxicities: u32,
    /// Defaults to the spec's cohort size.
    pub cohort_size: Option<u32>,
    /// Rejects the post when the session has moved past this version.
    pub expected_version: Option<u64>,
    /// Required when `dose` differs from the recommended dose.
    pub override_reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfInput {
    pub schema_version: u32,
    /// Omit to project every outcome `0..=cohort_size`.
    pub toxicities: Option<u32>,
    pub cohort_size: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalizeInput {
    pub schema_version: u32,
    /// Close a session that still has a pending recommendation.
    #[serde(default)]
    pub force: bool,
    pub expected_version: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Terminated,
    Completed,
}

/// One entry of a session's append-only log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub session_id: String,
    /// Session version after this event; the first event is 1.
    pub version: u64,
    pub at: DateTime<Utc>,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Created {
        design: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<Value>,
        spec: DesignSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
    },
    Cohort {
        dose: usize,
        cohort_size: u32,
        toxicities: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        override_reason: Option<String>,
        decision: Decision,
    },
    Finalized {
        forced: bool,
        selected: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoseView {
    pub dose: usize,
    pub n: u32,
    pub m: u32,
    pub observed_rate: Option<f64>,
    pub eliminated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryView {
    pub schema_version: u32,
    pub design: String,
    pub spec: DesignSpec,
    /// `(lambda1, lambda2)` when the boundaries do not depend on `n`.
    pub lambda: Option<(f64, f64)>,
    pub rows: Vec<BoundaryRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub dose: usize,
    pub n: u32,
    pub m: u32,
    pub observed: Option<f64>,
    pub isotonic: Option<f64>,
    pub candidate: bool,
    pub distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtdReport {
    pub selected: Option<usize>,
    /// `isotonic` or `model` (CRM posterior).
    pub method: String,
    pub tie_rule: Option<TieRule>,
    pub rationale: String,
    pub doses: Vec<SelectionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub schema_version: u32,
    pub id: String,
    pub version: u64,
    pub design: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub spec: DesignSpec,
    pub status: Status,
    /// Dose for the next cohort; absent once the trial has stopped.
    pub recommended_dose: Option<usize>,
    pub last_decision: Option<DecisionRecord>,
    pub total_patients: u32,
    pub eliminated_from: Option<usize>,
    pub doses: Vec<DoseView>,
    pub boundaries: Option<BoundaryView>,
    pub report: Option<MtdReport>,
    pub audit: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIfView {
    pub schema_version: u32,
    pub session_id: String,
    pub version: u64,
    pub dose: usize,
    pub cohort_size: u32,
    pub projections: Vec<DecisionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignList {
    pub schema_version: u32,
    pub designs: Vec<String>,
}
