//! One-based decision records for protocol tools and live conduct.

use serde::{Deserialize, Serialize};

use boin_core::{Decision, Result, TrialState};

use crate::policy::DesignPolicy;

/// A design's decision at the current dose with the boundaries behind it.
/// Dose numbers are one-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub design: String,
    pub dose: usize,
    pub n: u32,
    pub m: u32,
    pub observed_rate: f64,
    pub decision: Decision,
    /// Dose for the next cohort; absent when the trial stops.
    pub next_dose: Option<usize>,
    pub escalate_if_m_le: Option<u32>,
    pub deescalate_if_m_ge: Option<u32>,
    pub eliminate_if_m_ge: Option<u32>,
    /// The elimination rule fired at the current dose.
    pub eliminated: bool,
    /// Lowest closed dose after the decision.
    pub eliminated_from: Option<usize>,
    pub terminated: bool,
}

/// Runs the design's decision for `state` and describes it.
pub fn recommend(design: &dyn DesignPolicy, state: &TrialState) -> Result<DecisionRecord> {
    let decision = design.decide(state)?;
    Ok(describe(design, state, decision))
}

/// Describes an already computed `decision` taken in `state`.
pub fn describe(design: &dyn DesignPolicy, state: &TrialState, decision: Decision) -> DecisionRecord {
    let dose = state.current;
    let c = state.current_counts();
    let cutoffs = design.cutoffs(dose, c.n);
    let eliminate_if_m_ge = design.elimination().and_then(|e| e.min_toxicities(c.n));
    let mut after = state.clone();
    after.apply(decision);
    DecisionRecord {
        design: design.name().to_string(),
        dose: dose + 1,
        n: c.n,
        m: c.m,
        observed_rate: c.rate().unwrap_or(0.0),
        decision,
        next_dose: decision.next_dose(dose).map(|d| d + 1),
        escalate_if_m_le: cutoffs.and_then(|c| c.escalate_max),
        deescalate_if_m_ge: cutoffs.and_then(|c| c.deescalate_min),
        eliminate_if_m_ge,
        eliminated: eliminate_if_m_ge.is_some_and(|k| c.m >= k),
        eliminated_from: after.eliminated_from.map(|e| e + 1),
        terminated: after.terminated,
    }
}
