//! Dose-transition decisions for interval designs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundaries::{global_cutoff_table, local_boundaries, BoundaryFamily, Cutoffs, IntervalBoundaries, Signal};
use crate::design::DesignSpec;
use crate::elimination::{eliminate_check, EliminationBoundaries};
use crate::error::{Error, Result};
use crate::state::TrialState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LowestDoseEliminated,
    SampleExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Decision {
    Escalate,
    Deescalate,
    Stay,
    /// The current dose and all higher doses are closed; move down one level.
    EliminateAndDeescalate,
    TerminateTrial {
        reason: Termination,
    },
}

impl Decision {
    /// Dose assigned to the next cohort, `None` once the trial stops.
    pub fn next_dose(&self, current: usize) -> Option<usize> {
        match self {
            Decision::Escalate => Some(current + 1),
            Decision::Deescalate | Decision::EliminateAndDeescalate => Some(current - 1),
            Decision::Stay => Some(current),
            Decision::TerminateTrial { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Decision::Escalate => "escalate",
            Decision::Deescalate => "deescalate",
            Decision::Stay => "stay",
            Decision::EliminateAndDeescalate => "eliminate_and_deescalate",
            Decision::TerminateTrial { .. } => "terminate_trial",
        }
    }
}

/// Applies the edge rules to a raw signal: no deescalation below the lowest
/// dose, no escalation past the highest dose or into a closed dose.
pub fn resolve_signal(signal: Signal, current: usize, num_doses: usize, eliminated_from: Option<usize>) -> Decision {
    match signal {
        Signal::Escalate => {
            let top = eliminated_from.unwrap_or(num_doses).min(num_doses);
            if current + 1 < top {
                Decision::Escalate
            } else {
                Decision::Stay
            }
        }
        Signal::Deescalate if current > 0 => Decision::Deescalate,
        Signal::Deescalate | Signal::Stay => Decision::Stay,
    }
}

/// Decision implied by the elimination rule at the current dose, if it fires.
pub fn elimination_decision(current: usize) -> Decision {
    if current == 0 {
        Decision::TerminateTrial {
            reason: Termination::LowestDoseEliminated,
        }
    } else {
        Decision::EliminateAndDeescalate
    }
}

fn precheck(spec: &DesignSpec, state: &TrialState) -> Result<()> {
    state.validate(spec)?;
    if state.terminated {
        return Err(Error::state("trial is terminated"));
    }
    if state.current_counts().n == 0 {
        return Err(Error::state(format!(
            "no patients treated at current dose {}",
            state.current + 1
        )));
    }
    Ok(())
}

/// Next-cohort decision: elimination at the current dose first, then sample
/// exhaustion, then the boundary comparison with edge rules.
pub fn decide(spec: &DesignSpec, state: &TrialState, boundaries: &IntervalBoundaries) -> Result<Decision> {
    precheck(spec, state)?;
    let c = state.current_counts();
    if eliminate_check(spec, c.n, c.m)? {
        return Ok(elimination_decision(state.current));
    }
    if state.total_patients() >= spec.max_sample {
        return Ok(Decision::TerminateTrial {
            reason: Termination::SampleExhausted,
        });
    }
    let signal = boundaries.signal(c.n, c.m);
    Ok(resolve_signal(
        signal,
        state.current,
        state.num_doses(),
        state.eliminated_from,
    ))
}

/// An interval design with cutoffs and elimination boundaries precomputed
/// for every per-dose sample size up to the budget.
#[derive(Clone, Debug)]
pub struct IntervalDesign {
    spec: DesignSpec,
    family: BoundaryFamily,
    /// Per dose, cutoffs for `n = 1..=max_sample` at index `n - 1`.
    cutoffs: Vec<Arc<Vec<Cutoffs>>>,
    elimination: EliminationBoundaries,
}

impl IntervalDesign {
    pub fn new(spec: DesignSpec, family: BoundaryFamily) -> Result<Self> {
        spec.validate()?;
        let n_max = spec.max_sample;
        let table_for = |dose: usize| -> Result<Vec<Cutoffs>> {
            match family {
                BoundaryFamily::Local => (1..=n_max)
                    .map(|n| Ok(local_boundaries(&spec, dose, n)?.cutoffs_at(n)))
                    .collect(),
                BoundaryFamily::Global => global_cutoff_table(&spec, dose, n_max),
            }
        };
        let cutoffs = if spec.uniform_priors() {
            let shared = Arc::new(table_for(0)?);
            vec![shared; spec.num_doses]
        } else {
            (0..spec.num_doses)
                .map(|j| table_for(j).map(Arc::new))
                .collect::<Result<_>>()?
        };
        let elimination = EliminationBoundaries::new(&spec, n_max)?;
        Ok(IntervalDesign {
            spec,
            family,
            cutoffs,
            elimination,
        })
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn family(&self) -> BoundaryFamily {
        self.family
    }

    pub fn elimination(&self) -> &EliminationBoundaries {
        &self.elimination
    }

    pub fn cutoffs(&self, dose: usize, n: u32) -> Result<Cutoffs> {
        self.spec.check_dose(dose)?;
        if n == 0 || n > self.spec.max_sample {
            return Err(Error::parameter(
                "n",
                format!("must lie in 1..={}, got {n}", self.spec.max_sample),
            ));
        }
        Ok(self.cutoffs[dose][n as usize - 1])
    }

    /// Boundary record for `dose` at `n`, as the standalone functions report it.
    pub fn boundaries(&self, dose: usize, n: u32) -> Result<IntervalBoundaries> {
        match self.family {
            BoundaryFamily::Local => local_boundaries(&self.spec, dose, n),
            BoundaryFamily::Global => {
                let c = self.cutoffs(dose, n)?;
                let (b1, b2) = c.extended(n);
                Ok(IntervalBoundaries {
                    lambda1: b1 as f64 / n as f64,
                    lambda2: b2 as f64 / n as f64,
                    n: Some(n),
                    cutoffs: Some(c),
                    asymptotic: (self.spec.phi1, self.spec.phi2),
                })
            }
        }
    }

    /// Raw signal at `(n, m)` for `dose`, before elimination and edge rules.
    pub fn signal(&self, dose: usize, n: u32, m: u32) -> Signal {
        self.cutoffs[dose][n as usize - 1].signal(m)
    }

    pub fn decide(&self, state: &TrialState) -> Result<Decision> {
        precheck(&self.spec, state)?;
        Ok(self.decide_unchecked(state))
    }

    /// [`IntervalDesign::decide`] without validating the state; for
    /// simulation loops that maintain the invariants themselves.
    pub fn decide_unchecked(&self, state: &TrialState) -> Decision {
        let c = state.current_counts();
        if self.elimination.eliminates(c.n, c.m) {
            return elimination_decision(state.current);
        }
        if state.total_patients() >= self.spec.max_sample {
            return Decision::TerminateTrial {
                reason: Termination::SampleExhausted,
            };
        }
        resolve_signal(
            self.signal(state.current, c.n, c.m),
            state.current,
            state.num_doses(),
            state.eliminated_from,
        )
    }
}
