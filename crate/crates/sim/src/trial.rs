use serde::{Deserialize, Serialize};

use boin_core::{Decision, Error, Result, Termination, TrialState};
use boin_designs::DesignPolicy;

use crate::rng::{substream, PatientOutcomes, OUTCOME_STREAM};
use crate::scenario::Scenario;

/// Outcome of one simulated trial. Dose indices are zero-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub selected: Option<usize>,
    pub allocation: Vec<u32>,
    pub toxicities: Vec<u32>,
    pub sample_size: u32,
    pub total_toxicities: u32,
    pub termination: Termination,
    pub eliminated_from: Option<usize>,
    /// Dose given to each cohort, in order.
    pub path: Vec<usize>,
}

impl TrialResult {
    pub fn stopped_early(&self) -> bool {
        self.termination == Termination::LowestDoseEliminated
    }
}

/// Simulates one trial with outcomes drawn from `seed`.
pub fn run_trial(design: &dyn DesignPolicy, scenario: &Scenario, seed: u64) -> Result<TrialResult> {
    let spec = design.spec();
    let mut rng = substream(seed, OUTCOME_STREAM, 0);
    let outcomes = PatientOutcomes::draw(&mut rng, spec.num_doses, spec.max_sample as usize);
    simulate(design, scenario, &outcomes)
}

/// Cohort-by-cohort conduct against fixed patient outcomes: treat at the
/// current dose, let the design decide, and stop when it terminates.
pub fn simulate(design: &dyn DesignPolicy, scenario: &Scenario, outcomes: &PatientOutcomes) -> Result<TrialResult> {
    let spec = design.spec();
    if scenario.num_doses() != spec.num_doses {
        return Err(Error::parameter(
            "scenario",
            format!(
                "{} has {} doses, design expects {}",
                scenario.label,
                scenario.num_doses(),
                spec.num_doses
            ),
        ));
    }
    if outcomes.slots() < spec.max_sample as usize {
        return Err(Error::parameter(
            "outcomes",
            "fewer patient slots than the sample budget",
        ));
    }
    let mut state = TrialState::new(spec.num_doses);
    let mut path = Vec::with_capacity((spec.max_sample / spec.cohort_size.max(1)) as usize + 1);
    let termination = loop {
        let dose = state.current;
        let size = spec.cohort_size.min(spec.max_sample - state.total_patients());
        let first = state.counts[dose].n as usize;
        let tox = (first..first + size as usize)
            .filter(|&slot| outcomes.is_toxic(dose, slot, scenario.probs[dose]))
            .count() as u32;
        state.record_cohort(dose, size, tox)?;
        path.push(dose);
        let decision = design.decide(&state)?;
        state.apply(decision);
        if let Decision::TerminateTrial { reason } = decision {
            break reason;
        }
        // elimination outranks budget exhaustion in the decision itself
        if state.total_patients() >= spec.max_sample {
            break Termination::SampleExhausted;
        }
    };
    let selected = if state.eliminated_from == Some(0) {
        None
    } else {
        design.select(&state)?
    };
    Ok(TrialResult {
        selected,
        allocation: state.counts.iter().map(|c| c.n).collect(),
        toxicities: state.counts.iter().map(|c| c.m).collect(),
        sample_size: state.total_patients(),
        total_toxicities: state.total_toxicities(),
        termination,
        eliminated_from: state.eliminated_from,
        path,
    })
}
