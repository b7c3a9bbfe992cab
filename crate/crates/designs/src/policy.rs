use std::fmt;

use serde::{Deserialize, Serialize};

use boin_core::{
    resolve_signal, select_from_counts, BoundaryFamily, Cutoffs, Decision, DesignSpec, EliminationBoundaries, Error,
    IntervalDesign, Result, Signal, Termination, TrialState,
};

use crate::crm::CrmPolicy;
use crate::rules::{ccd_signal, gud_signal, mtpi_signal};

/// A dose-finding design: a per-cohort transition rule plus an end-of-trial
/// selector.
pub trait DesignPolicy: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn spec(&self) -> &DesignSpec;
    /// Decision after the most recent cohort.
    fn decide(&self, state: &TrialState) -> Result<Decision>;
    /// Selected MTD (zero-based), `None` when the design names none.
    fn select(&self, state: &TrialState) -> Result<Option<usize>>;
    /// Cutoffs on `m` at `(dose, n)` for designs whose signal depends only
    /// on the cumulative counts there.
    fn cutoffs(&self, _dose: usize, _n: u32) -> Option<Cutoffs> {
        None
    }
    /// The shared elimination rule, for designs that apply it.
    fn elimination(&self) -> Option<&EliminationBoundaries> {
        None
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

/// Elimination, then sample exhaustion, then the design's own signal.
fn rule_decision(
    spec: &DesignSpec,
    elimination: &EliminationBoundaries,
    state: &TrialState,
    signal: impl FnOnce() -> Result<Signal>,
) -> Result<Decision> {
    let c = state.current_counts();
    if elimination.eliminates(c.n, c.m) {
        return Ok(boin_core::decision::elimination_decision(state.current));
    }
    if state.total_patients() >= spec.max_sample {
        return Ok(Decision::TerminateTrial {
            reason: Termination::SampleExhausted,
        });
    }
    Ok(resolve_signal(
        signal()?,
        state.current,
        state.num_doses(),
        state.eliminated_from,
    ))
}

fn isotonic_selection(spec: &DesignSpec, state: &TrialState) -> Result<Option<usize>> {
    if state.counts.len() != spec.num_doses {
        return Err(Error::parameter(
            "counts",
            format!("expected {} doses, got {}", spec.num_doses, state.counts.len()),
        ));
    }
    Ok(select_from_counts(&state.counts, state.eliminated_from, spec.phi).selected)
}

/// Local or global optimal interval design.
#[derive(Clone, Debug)]
pub struct OptimalInterval {
    name: String,
    design: IntervalDesign,
}

impl OptimalInterval {
    pub fn new(spec: DesignSpec, family: BoundaryFamily) -> Result<Self> {
        let name = match family {
            BoundaryFamily::Local => "local-optimal",
            BoundaryFamily::Global => "global-optimal",
        };
        Ok(OptimalInterval {
            name: name.into(),
            design: IntervalDesign::new(spec, family)?,
        })
    }

    pub fn design(&self) -> &IntervalDesign {
        &self.design
    }
}

impl DesignPolicy for OptimalInterval {
    fn name(&self) -> &str {
        &self.name
    }
    fn spec(&self) -> &DesignSpec {
        self.design.spec()
    }
    fn decide(&self, state: &TrialState) -> Result<Decision> {
        self.design.decide(state)
    }
    fn select(&self, state: &TrialState) -> Result<Option<usize>> {
        isotonic_selection(self.design.spec(), state)
    }
    fn cutoffs(&self, dose: usize, n: u32) -> Option<Cutoffs> {
        self.design.cutoffs(dose, n).ok()
    }
    fn elimination(&self) -> Option<&EliminationBoundaries> {
        Some(self.design.elimination())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcdConfig {
    pub delta: f64,
}

impl Default for CcdConfig {
    fn default() -> Self {
        CcdConfig { delta: 0.09 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtpiConfig {
    /// Beta prior on the toxicity probability.
    pub prior: (f64, f64),
}

impl Default for MtpiConfig {
    fn default() -> Self {
        MtpiConfig { prior: (1.0, 1.0) }
    }
}

/// Interval design whose signal depends only on `(n, m)` at the current
/// dose, tabulated up to the sample budget.
#[derive(Clone)]
pub struct TabulatedInterval {
    name: String,
    spec: DesignSpec,
    /// Row `n - 1` holds the signals for `m = 0..=n`.
    grid: Vec<Vec<Signal>>,
    elimination: EliminationBoundaries,
}

impl fmt::Debug for TabulatedInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedInterval")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

impl TabulatedInterval {
    fn build(name: &str, spec: DesignSpec, rule: impl Fn(u32, u32) -> Result<Signal>) -> Result<Self> {
        spec.validate()?;
        let grid = (1..=spec.max_sample)
            .map(|n| (0..=n).map(|m| rule(n, m)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let elimination = EliminationBoundaries::new(&spec, spec.max_sample)?;
        Ok(TabulatedInterval {
            name: name.into(),
            spec,
            grid,
            elimination,
        })
    }

    pub fn ccd(spec: DesignSpec, config: CcdConfig) -> Result<Self> {
        let phi = spec.phi;
        Self::build("ccd", spec, |n, m| ccd_signal(n, m, phi, config.delta))
    }

    pub fn mtpi(spec: DesignSpec, config: MtpiConfig) -> Result<Self> {
        let (a, b) = config.prior;
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::parameter("prior", "beta shapes must be positive"));
        }
        let (phi1, phi2) = (spec.phi1, spec.phi2);
        Self::build("mtpi", spec, |n, m| mtpi_signal(n, m, phi1, phi2, config.prior))
    }

    pub fn signal(&self, n: u32, m: u32) -> Signal {
        self.grid[n as usize - 1][m as usize]
    }
}

impl DesignPolicy for TabulatedInterval {
    fn name(&self) -> &str {
        &self.name
    }
    fn spec(&self) -> &DesignSpec {
        &self.spec
    }
    fn decide(&self, state: &TrialState) -> Result<Decision> {
        precheck(&self.spec, state)?;
        let c = state.current_counts();
        rule_decision(&self.spec, &self.elimination, state, || Ok(self.signal(c.n, c.m)))
    }
    fn select(&self, state: &TrialState) -> Result<Option<usize>> {
        isotonic_selection(&self.spec, state)
    }
    fn cutoffs(&self, dose: usize, n: u32) -> Option<Cutoffs> {
        if dose >= self.spec.num_doses || n == 0 || n > self.spec.max_sample {
            return None;
        }
        let row = &self.grid[n as usize - 1];
        // signals are monotone in m, so the regions are contiguous
        Some(Cutoffs {
            escalate_max: row.iter().rposition(|s| *s == Signal::Escalate).map(|m| m as u32),
            deescalate_min: row.iter().position(|s| *s == Signal::Deescalate).map(|m| m as u32),
        })
    }
    fn elimination(&self) -> Option<&EliminationBoundaries> {
        Some(&self.elimination)
    }
}

/// Group up-and-down design driven by the most recent cohort.
#[derive(Clone, Debug)]
pub struct GroupUpDown {
    spec: DesignSpec,
    elimination: EliminationBoundaries,
}

impl GroupUpDown {
    pub fn new(spec: DesignSpec) -> Result<Self> {
        spec.validate()?;
        let elimination = EliminationBoundaries::new(&spec, spec.max_sample)?;
        Ok(GroupUpDown { spec, elimination })
    }
}

impl DesignPolicy for GroupUpDown {
    fn name(&self) -> &str {
        "gud"
    }
    fn spec(&self) -> &DesignSpec {
        &self.spec
    }
    fn decide(&self, state: &TrialState) -> Result<Decision> {
        precheck(&self.spec, state)?;
        let last = state
            .history
            .last()
            .ok_or_else(|| Error::state("the up-and-down rule needs the most recent cohort"))?;
        if last.dose != state.current {
            return Err(Error::state(format!(
                "most recent cohort was at dose {}, current dose is {}",
                last.dose + 1,
                state.current + 1
            )));
        }
        rule_decision(&self.spec, &self.elimination, state, || {
            gud_signal(last.toxicities, last.size)
        })
    }
    fn select(&self, state: &TrialState) -> Result<Option<usize>> {
        isotonic_selection(&self.spec, state)
    }
    fn elimination(&self) -> Option<&EliminationBoundaries> {
        Some(&self.elimination)
    }
}

impl DesignPolicy for CrmPolicy {
    fn name(&self) -> &str {
        "crm"
    }
    fn spec(&self) -> &DesignSpec {
        CrmPolicy::spec(self)
    }
    fn decide(&self, state: &TrialState) -> Result<Decision> {
        CrmPolicy::decide(self, state)
    }
    fn select(&self, state: &TrialState) -> Result<Option<usize>> {
        CrmPolicy::select(self, state)
    }
}
