//! Trial sessions as a fold over their event log.
//!
//! Live requests build an event from the current snapshot and then apply it
//! through the same [`Session::apply`] used for replay, so a replayed log
//! reaches the state that was served.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde_json::Value;

use boin_core::{local_boundaries, select_mtd, BoundaryRow, DesignSpec, TrialState};
use boin_designs::{build_design, recommend, DecisionRecord, DesignPolicy};

use crate::api::{
    check_schema, Action, BoundaryView, CohortInput, CreateSession, DoseView, Event, FinalizeInput, MtdReport,
    SelectionRow, SessionView, Status, WhatIfInput, WhatIfView, SCHEMA_VERSION,
};
use crate::error::{ApiError, ApiResult};

/// Registered design name for `name`, accepting the short interval aliases.
pub fn canonical_design(name: &str) -> &str {
    match name {
        "local" => "local-optimal",
        "global" => "global-optimal",
        other => other,
    }
}

/// Cutoffs at the lowest dose for `n = 1..=n_max`, for designs that have them.
pub fn boundary_view(name: &str, policy: &dyn DesignPolicy, n_max: u32) -> Option<BoundaryView> {
    let spec = policy.spec();
    let n_max = n_max.min(spec.max_sample);
    let rows = (1..=n_max)
        .map(|n| {
            policy.cutoffs(0, n).map(|c| BoundaryRow {
                n,
                escalate_if_m_le: c.escalate_max,
                deescalate_if_m_ge: c.deescalate_min,
                eliminate_if_m_ge: policy.elimination().and_then(|e| e.min_toxicities(n)),
            })
        })
        .collect::<Option<Vec<_>>>()?;
    let lambda = (name == "local-optimal")
        .then(|| local_boundaries(spec, 0, 1).ok())
        .flatten()
        .filter(|b| b.n.is_none())
        .map(|b| (b.lambda1, b.lambda2));
    Some(BoundaryView {
        schema_version: SCHEMA_VERSION,
        design: name.to_string(),
        spec: spec.clone(),
        lambda,
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub design: String,
    pub config: Option<Value>,
    pub policy: Arc<dyn DesignPolicy>,
    pub state: TrialState,
    pub version: u64,
    pub status: Status,
    pub last: Option<DecisionRecord>,
    pub report: Option<MtdReport>,
    pub idempotency_key: Option<String>,
    pub log: Vec<Event>,
}

impl Session {
    /// The creation event for a request, after validating it.
    pub fn creation_event(
        id: &str,
        request: &CreateSession,
        idempotency_key: Option<String>,
        at: DateTime<Utc>,
    ) -> ApiResult<Event> {
        check_schema(request.schema_version)?;
        let spec = request.spec.build()?;
        let design = canonical_design(&request.design).to_string();
        build_design(&design, spec.clone(), request.config.as_ref())?;
        Ok(Event {
            session_id: id.to_string(),
            version: 1,
            at,
            action: Action::Created {
                design,
                config: request.config.clone(),
                spec,
                idempotency_key,
            },
        })
    }

    /// Starts a session from its creation event.
    pub fn create(event: &Event) -> ApiResult<Session> {
        let Action::Created {
            design,
            config,
            spec,
            idempotency_key,
        } = &event.action
        else {
            return Err(ApiError::storage(format!(
                "session {} does not start with a creation event",
                event.session_id
            )));
        };
        if event.version != 1 {
            return Err(ApiError::storage(format!(
                "session {} starts at version {}",
                event.session_id, event.version
            )));
        }
        let policy = build_design(design, spec.clone(), config.as_ref())?;
        Ok(Session {
            id: event.session_id.clone(),
            design: design.clone(),
            config: config.clone(),
            state: TrialState::new(spec.num_doses),
            policy,
            version: 1,
            status: Status::Active,
            last: None,
            report: None,
            idempotency_key: idempotency_key.clone(),
            log: vec![event.clone()],
        })
    }

    /// Rebuilds a session from its full log.
    pub fn replay(events: &[Event]) -> ApiResult<Session> {
        let (first, rest) = events
            .split_first()
            .ok_or_else(|| ApiError::storage("empty session log"))?;
        let mut session = Session::create(first)?;
        for event in rest {
            session.apply(event)?;
        }
        Ok(session)
    }

    pub fn spec(&self) -> &DesignSpec {
        self.policy.spec()
    }

    /// Whether `request` would create this same session.
    pub fn matches(&self, request: &CreateSession) -> bool {
        canonical_design(&request.design) == self.design
            && request.config == self.config
            && request.spec.build().is_ok_and(|s| &s == self.spec())
    }

    /// Applies an event after the first. Recorded decisions must agree with
    /// the decision recomputed from the log.
    pub fn apply(&mut self, event: &Event) -> ApiResult<()> {
        if event.session_id != self.id || event.version != self.version + 1 {
            return Err(ApiError::storage(format!(
                "event {} v{} does not follow session {} v{}",
                event.session_id, event.version, self.id, self.version
            )));
        }
        match &event.action {
            Action::Created { .. } => {
                return Err(ApiError::storage(format!("session {} created twice", self.id)));
            }
            Action::Cohort {
                dose,
                cohort_size,
                toxicities,
                decision,
                ..
            } => {
                if self.status != Status::Active {
                    return Err(ApiError::storage(format!(
                        "session {} v{}: cohort after close",
                        self.id, event.version
                    )));
                }
                let (state, record) = self.project(*dose, *cohort_size, *toxicities)?;
                if record.decision != *decision {
                    return Err(ApiError::storage(format!(
                        "session {} v{}: logged decision {} but the design gives {}",
                        self.id,
                        event.version,
                        decision.label(),
                        record.decision.label()
                    )));
                }
                self.state = state;
                self.last = Some(record);
                if self.state.terminated {
                    self.status = Status::Terminated;
                }
            }
            Action::Finalized { selected, .. } => {
                let report = self.mtd_report()?;
                if report.selected != *selected {
                    return Err(ApiError::storage(format!(
                        "session {}: logged MTD {selected:?} but selection gives {:?}",
                        self.id, report.selected
                    )));
                }
                self.report = Some(report);
                self.status = Status::Completed;
            }
        }
        self.version = event.version;
        self.log.push(event.clone());
        Ok(())
    }

    fn require_active(&self) -> ApiResult<()> {
        match self.status {
            Status::Active => Ok(()),
            Status::Terminated => Err(ApiError::conflict(format!("session {} is terminated", self.id))),
            Status::Completed => Err(ApiError::conflict(format!("session {} is completed", self.id))),
        }
    }

    fn check_version(&self, expected: Option<u64>) -> ApiResult<()> {
        match expected {
            Some(v) if v != self.version => Err(ApiError::version_conflict(v, self.version)),
            _ => Ok(()),
        }
    }

    /// Validates a one-based dose and cohort against the session.
    fn check_cohort(&self, dose: usize, size: u32, toxicities: u32) -> ApiResult<usize> {
        let spec = self.spec();
        if dose == 0 || dose > spec.num_doses {
            return Err(ApiError::validation(
                "dose",
                format!("dose {dose} outside 1..={}", spec.num_doses),
            ));
        }
        if self.state.is_eliminated(dose - 1) {
            return Err(ApiError::validation("dose", format!("dose {dose} has been eliminated")));
        }
        if size == 0 {
            return Err(ApiError::validation("cohort_size", "must be at least 1"));
        }
        if toxicities > size {
            return Err(ApiError::validation(
                "toxicities",
                format!("toxicities ({toxicities}) exceed cohort size ({size})"),
            ));
        }
        let total = self.state.total_patients() + size;
        if total > spec.max_sample {
            return Err(ApiError::validation(
                "cohort_size",
                format!("{total} patients would exceed the sample budget of {}", spec.max_sample),
            ));
        }
        Ok(dose - 1)
    }

    /// State and decision after a cohort at one-based `dose`. Shared by
    /// posted cohorts, replay and what-if projections.
    pub fn project(&self, dose: usize, size: u32, toxicities: u32) -> ApiResult<(TrialState, DecisionRecord)> {
        let j = self.check_cohort(dose, size, toxicities)?;
        let mut state = self.state.clone();
        state.current = j;
        state.record_cohort(j, size, toxicities)?;
        let record = recommend(self.policy.as_ref(), &state)?;
        state.apply(record.decision);
        Ok((state, record))
    }

    pub fn cohort_event(&self, input: &CohortInput, at: DateTime<Utc>) -> ApiResult<Event> {
        check_schema(input.schema_version)?;
        self.require_active()?;
        self.check_version(input.expected_version)?;
        let size = input.cohort_size.unwrap_or(self.spec().cohort_size);
        self.check_cohort(input.dose, size, input.toxicities)?;
        let recommended = self.state.current + 1;
        let reason = input
            .override_reason
            .as_deref()
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .map(str::to_string);
        if input.dose != recommended {
            if reason.is_none() {
                return Err(ApiError::validation(
                    "override_reason",
                    format!(
                        "dose {} differs from the recommended dose {recommended}; an override reason is required",
                        input.dose
                    ),
                ));
            }
            tracing::info!(session = %self.id, dose = input.dose, recommended, "dose override");
        }
        let (_, record) = self.project(input.dose, size, input.toxicities)?;
        Ok(Event {
            session_id: self.id.clone(),
            version: self.version + 1,
            at,
            action: Action::Cohort {
                dose: input.dose,
                cohort_size: size,
                toxicities: input.toxicities,
                override_reason: if input.dose != recommended { reason } else { None },
                decision: record.decision,
            },
        })
    }

    pub fn what_if(&self, input: &WhatIfInput) -> ApiResult<WhatIfView> {
        check_schema(input.schema_version)?;
        self.require_active()?;
        let size = input.cohort_size.unwrap_or(self.spec().cohort_size);
        let dose = self.state.current + 1;
        let outcomes = match input.toxicities {
            Some(t) => t..=t,
            None => 0..=size,
        };
        let projections = outcomes
            .map(|t| self.project(dose, size, t).map(|(_, r)| r))
            .collect::<ApiResult<Vec<_>>>()?;
        Ok(WhatIfView {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            version: self.version,
            dose,
            cohort_size: size,
            projections,
        })
    }

    pub fn finalize_event(&self, input: &FinalizeInput, at: DateTime<Utc>) -> ApiResult<Event> {
        check_schema(input.schema_version)?;
        self.check_version(input.expected_version)?;
        match self.status {
            Status::Completed => {
                return Err(ApiError::conflict(format!("session {} is already finalized", self.id)));
            }
            Status::Active if !input.force => {
                return Err(ApiError::conflict(format!(
                    "session {} is active with dose {} recommended; set force to close it",
                    self.id,
                    self.state.current + 1
                )));
            }
            _ => {}
        }
        let report = self.mtd_report()?;
        Ok(Event {
            session_id: self.id.clone(),
            version: self.version + 1,
            at,
            action: Action::Finalized {
                forced: self.status == Status::Active,
                selected: report.selected,
            },
        })
    }

    /// The design's MTD with the isotonic estimates behind it.
    pub fn mtd_report(&self) -> ApiResult<MtdReport> {
        let iso = select_mtd(&self.state, self.spec())?;
        let selected = self.policy.select(&self.state)?;
        let model = self.design == "crm";
        let rationale = match (model, selected) {
            (false, _) => iso.note.clone(),
            (true, Some(d)) => format!(
                "dose {} has the posterior toxicity estimate closest to the target",
                d + 1
            ),
            (true, None) => "no dose passes the overdose control; no MTD".to_string(),
        };
        let doses = self
            .state
            .counts
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = iso.candidates.iter().position(|&d| d == j);
                SelectionRow {
                    dose: j + 1,
                    n: c.n,
                    m: c.m,
                    observed: iso.observed[j],
                    isotonic: iso.isotonic[j],
                    candidate: k.is_some(),
                    distance: k.map(|k| iso.distances[k]),
                }
            })
            .collect();
        Ok(MtdReport {
            selected: selected.map(|d| d + 1),
            method: if model { "model" } else { "isotonic" }.to_string(),
            tie_rule: if model { None } else { iso.tie_rule },
            rationale,
            doses,
        })
    }

    pub fn view(&self) -> SessionView {
        let spec = self.spec();
        SessionView {
            schema_version: SCHEMA_VERSION,
            id: self.id.clone(),
            version: self.version,
            design: self.design.clone(),
            config: self.config.clone(),
            spec: spec.clone(),
            status: self.status,
            recommended_dose: (self.status == Status::Active).then_some(self.state.current + 1),
            last_decision: self.last.clone(),
            total_patients: self.state.total_patients(),
            eliminated_from: self.state.eliminated_from.map(|e| e + 1),
            doses: self
                .state
                .counts
                .iter()
                .enumerate()
                .map(|(j, c)| DoseView {
                    dose: j + 1,
                    n: c.n,
                    m: c.m,
                    observed_rate: c.rate(),
                    eliminated: self.state.is_eliminated(j),
                })
                .collect(),
            boundaries: boundary_view(&self.design, self.policy.as_ref(), spec.max_sample),
            report: self.report.clone(),
            audit: self.log.clone(),
        }
    }
}
