//! Cumulative trial state.
//!
//! Dose indices are zero-based throughout the library. The CLI and the HTTP
//! service translate to the one-based numbering used in protocols.

use serde::{Deserialize, Serialize};

use crate::decision::Decision;
use crate::design::DesignSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoseCounts {
    /// Patients treated.
    pub n: u32,
    /// Toxicities observed.
    pub m: u32,
}

impl DoseCounts {
    pub fn new(n: u32, m: u32) -> Self {
        DoseCounts { n, m }
    }

    /// Observed toxicity rate, `None` when untreated.
    pub fn rate(&self) -> Option<f64> {
        (self.n > 0).then(|| self.m as f64 / self.n as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CohortRecord {
    pub dose: usize,
    pub size: u32,
    pub toxicities: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialState {
    pub counts: Vec<DoseCounts>,
    pub current: usize,
    /// Lowest closed dose; every dose at or above it is closed.
    pub eliminated_from: Option<usize>,
    pub terminated: bool,
    #[serde(default)]
    pub history: Vec<CohortRecord>,
}

impl TrialState {
    /// Fresh trial at the lowest dose.
    pub fn new(num_doses: usize) -> Self {
        TrialState {
            counts: vec![DoseCounts::default(); num_doses],
            current: 0,
            eliminated_from: None,
            terminated: false,
            history: Vec::new(),
        }
    }

    /// State built from cumulative counts without cohort history.
    pub fn from_counts(counts: Vec<DoseCounts>, current: usize) -> Result<Self> {
        if current >= counts.len() {
            return Err(Error::parameter(
                "current",
                format!("dose {} outside 1..={}", current + 1, counts.len()),
            ));
        }
        for (j, c) in counts.iter().enumerate() {
            if c.m > c.n {
                return Err(Error::parameter(
                    format!("counts[{}]", j + 1),
                    format!("toxicities ({}) exceed patients ({})", c.m, c.n),
                ));
            }
        }
        Ok(TrialState {
            counts,
            current,
            eliminated_from: None,
            terminated: false,
            history: Vec::new(),
        })
    }

    pub fn num_doses(&self) -> usize {
        self.counts.len()
    }

    pub fn total_patients(&self) -> u32 {
        self.counts.iter().map(|c| c.n).sum()
    }

    pub fn total_toxicities(&self) -> u32 {
        self.counts.iter().map(|c| c.m).sum()
    }

    pub fn current_counts(&self) -> DoseCounts {
        self.counts[self.current]
    }

    pub fn is_eliminated(&self, dose: usize) -> bool {
        self.eliminated_from.is_some_and(|e| dose >= e)
    }

    /// Adds a cohort outcome at `dose`.
    pub fn record_cohort(&mut self, dose: usize, size: u32, toxicities: u32) -> Result<()> {
        if self.terminated {
            return Err(Error::state("trial is terminated"));
        }
        if dose >= self.counts.len() {
            return Err(Error::parameter(
                "dose",
                format!("dose {} outside 1..={}", dose + 1, self.counts.len()),
            ));
        }
        if self.is_eliminated(dose) {
            return Err(Error::state(format!("dose {} has been eliminated", dose + 1)));
        }
        if size == 0 {
            return Err(Error::parameter("cohort_size", "must be at least 1"));
        }
        if toxicities > size {
            return Err(Error::parameter(
                "toxicities",
                format!("toxicities ({toxicities}) exceed cohort size ({size})"),
            ));
        }
        let c = &mut self.counts[dose];
        c.n += size;
        c.m += toxicities;
        self.history.push(CohortRecord { dose, size, toxicities });
        Ok(())
    }

    /// Moves the trial according to `decision`.
    pub fn apply(&mut self, decision: Decision) {
        match decision {
            Decision::Escalate => self.current += 1,
            Decision::Deescalate => self.current -= 1,
            Decision::Stay => {}
            Decision::EliminateAndDeescalate => {
                self.close_from(self.current);
                self.current -= 1;
            }
            Decision::TerminateTrial { reason } => {
                if reason == crate::decision::Termination::LowestDoseEliminated {
                    self.close_from(0);
                }
                self.terminated = true;
            }
        }
    }

    fn close_from(&mut self, dose: usize) {
        self.eliminated_from = Some(self.eliminated_from.map_or(dose, |e| e.min(dose)));
    }

    /// Checks the state against the spec's structural invariants.
    pub fn validate(&self, spec: &DesignSpec) -> Result<()> {
        if self.counts.len() != spec.num_doses {
            return Err(Error::parameter(
                "counts",
                format!("expected {} doses, got {}", spec.num_doses, self.counts.len()),
            ));
        }
        if self.current >= self.counts.len() {
            return Err(Error::parameter(
                "current",
                format!("dose {} outside 1..={}", self.current + 1, self.counts.len()),
            ));
        }
        for (j, c) in self.counts.iter().enumerate() {
            if c.m > c.n {
                return Err(Error::parameter(
                    format!("counts[{}]", j + 1),
                    format!("toxicities ({}) exceed patients ({})", c.m, c.n),
                ));
            }
        }
        let total = self.total_patients();
        if total > spec.max_sample {
            return Err(Error::state(format!(
                "{total} patients treated, budget is {}",
                spec.max_sample
            )));
        }
        if let Some(e) = self.eliminated_from {
            if !self.terminated && self.current >= e {
                return Err(Error::state(format!(
                    "current dose {} is at or above eliminated dose {}",
                    self.current + 1,
                    e + 1
                )));
            }
        }
        Ok(())
    }
}
