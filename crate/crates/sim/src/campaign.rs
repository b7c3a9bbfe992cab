//! Replicated trials and their operating characteristics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use boin_core::{Error, Result};
use boin_designs::DesignPolicy;

use crate::rng::{substream, PatientOutcomes, OUTCOME_STREAM, SCENARIO_STREAM};
use crate::scenario::{Scenario, ScenarioGenConfig, ScenarioNoise};
use crate::trial::{simulate, TrialResult};

/// How `n_MTD` is compared with `n / J` for the poor-allocation risk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoorAllocationRule {
    /// `n_MTD <= n / J`
    #[default]
    AtMost,
    /// `n_MTD < n / J`
    Below,
}

impl PoorAllocationRule {
    fn is_poor(self, n_mtd: u32, max_sample: u32, num_doses: usize) -> bool {
        // integer comparison of n_MTD * J against n
        let lhs = n_mtd as u64 * num_doses as u64;
        let rhs = max_sample as u64;
        match self {
            PoorAllocationRule::AtMost => lhs <= rhs,
            PoorAllocationRule::Below => lhs < rhs,
        }
    }
}

/// Where each replicate's true dose-toxicity curve comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSource {
    /// Each scenario is its own ensemble of replicates.
    Fixed(Vec<Scenario>),
    /// A fresh random scenario per replicate, reported as one ensemble.
    Random {
        config: ScenarioGenConfig,
        phi: f64,
        label: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSettings {
    pub replicates: u64,
    pub seed: u64,
    #[serde(default)]
    pub poor_allocation: PoorAllocationRule,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

impl CampaignSettings {
    pub fn new(replicates: u64, seed: u64) -> Self {
        CampaignSettings {
            replicates,
            seed,
            poor_allocation: PoorAllocationRule::default(),
            workers: None,
        }
    }
}

/// Mean and Monte Carlo standard error of a per-replicate quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Two-pass mean and `sd / sqrt(R)`; the error is zero for one replicate.
    pub fn from_values(values: &[f64]) -> Estimate {
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        if values.len() < 2 {
            return Estimate { mean, se: 0.0 };
        }
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Estimate {
            mean,
            se: (ss / (r - 1.0) / r).sqrt(),
        }
    }
}

/// Operating characteristics of one design on one scenario ensemble.
/// Percentages are on a 0-100 scale; counts are patients per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub design: String,
    pub scenario: String,
    pub replicates: u64,
    pub mtd_selection_pct: Estimate,
    /// Per-trial percentage of patients treated at the MTD.
    pub pct_patients_at_mtd: Estimate,
    pub patients_at_mtd: Estimate,
    /// Per-trial percentage of patients with a toxicity.
    pub avg_toxicity_rate: Estimate,
    pub risk_poor_allocation_pct: Estimate,
    pub risk_high_toxicity_pct: Estimate,
    pub avg_sample_size: Estimate,
    /// Trials stopped because the lowest dose was eliminated.
    pub early_termination_pct: f64,
    pub no_selection_pct: f64,
    /// Selection percentage for each dose.
    pub selection_pct: Vec<f64>,
    /// Mean patients treated at each dose.
    pub patients_per_dose: Vec<f64>,
}

fn summarize(
    design: &dyn DesignPolicy,
    scenario_label: &str,
    trials: &[(usize, TrialResult)],
    rule: PoorAllocationRule,
) -> OperatingCharacteristics {
    let spec = design.spec();
    let j = spec.num_doses;
    let r = trials.len() as f64;
    let pct = |flag: bool| if flag { 100.0 } else { 0.0 };
    let collect =
        |f: &dyn Fn(usize, &TrialResult) -> f64| -> Vec<f64> { trials.iter().map(|(mtd, t)| f(*mtd, t)).collect() };
    let high_tox_limit = spec.max_sample as f64 * spec.phi;

    let mut selection = vec![0.0; j];
    let mut patients = vec![0.0; j];
    let mut none = 0.0;
    for (_, t) in trials {
        match t.selected {
            Some(d) => selection[d] += 1.0,
            None => none += 1.0,
        }
        for (acc, &n) in patients.iter_mut().zip(&t.allocation) {
            *acc += n as f64;
        }
    }

    OperatingCharacteristics {
        design: design.name().to_string(),
        scenario: scenario_label.to_string(),
        replicates: trials.len() as u64,
        mtd_selection_pct: Estimate::from_values(&collect(&|mtd, t| pct(t.selected == Some(mtd)))),
        pct_patients_at_mtd: Estimate::from_values(&collect(&|mtd, t| {
            100.0 * t.allocation[mtd] as f64 / t.sample_size as f64
        })),
        patients_at_mtd: Estimate::from_values(&collect(&|mtd, t| t.allocation[mtd] as f64)),
        avg_toxicity_rate: Estimate::from_values(&collect(&|_, t| {
            100.0 * t.total_toxicities as f64 / t.sample_size as f64
        })),
        risk_poor_allocation_pct: Estimate::from_values(&collect(&|mtd, t| {
            pct(rule.is_poor(t.allocation[mtd], spec.max_sample, j))
        })),
        risk_high_toxicity_pct: Estimate::from_values(&collect(
            &|_, t| pct(t.total_toxicities as f64 > high_tox_limit),
        )),
        avg_sample_size: Estimate::from_values(&collect(&|_, t| t.sample_size as f64)),
        early_termination_pct: 100.0 * trials.iter().filter(|(_, t)| t.stopped_early()).count() as f64 / r,
        no_selection_pct: 100.0 * none / r,
        selection_pct: selection.iter().map(|c| 100.0 * c / r).collect(),
        patients_per_dose: patients.iter().map(|c| c / r).collect(),
    }
}

fn check_designs(designs: &[Arc<dyn DesignPolicy>]) -> Result<()> {
    let first = designs
        .first()
        .ok_or_else(|| Error::parameter("designs", "at least one design is required"))?
        .spec();
    for d in designs {
        let s = d.spec();
        if s.num_doses != first.num_doses || s.max_sample != first.max_sample || s.phi != first.phi {
            return Err(Error::parameter(
                "designs",
                "all designs in a campaign must share the target, dose count and sample size",
            ));
        }
    }
    Ok(())
}

/// Runs every design on the same replicates and summarizes each ensemble.
///
/// Replicate `r` draws its patient outcomes (and, for random sources, its
/// scenario) from substream `r` of the master seed, so all designs face
/// identical patients and the output does not depend on the worker count.
/// Rows are ordered by ensemble, then by design.
pub fn run_campaign(
    designs: &[Arc<dyn DesignPolicy>],
    source: &ScenarioSource,
    settings: &CampaignSettings,
) -> Result<Vec<OperatingCharacteristics>> {
    check_designs(designs)?;
    if settings.replicates == 0 {
        return Err(Error::parameter("replicates", "must be at least 1"));
    }
    let job = || match source {
        ScenarioSource::Fixed(scenarios) => fixed_campaign(designs, scenarios, settings),
        ScenarioSource::Random { config, phi, label } => random_campaign(designs, config, *phi, label, settings),
    };
    match settings.workers {
        None => job(),
        Some(0) => Err(Error::parameter("workers", "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?
            .install(job),
    }
}

fn outcomes_for(settings: &CampaignSettings, replicate: u64, num_doses: usize, slots: usize) -> PatientOutcomes {
    PatientOutcomes::draw(
        &mut substream(settings.seed, OUTCOME_STREAM, replicate),
        num_doses,
        slots,
    )
}

fn fixed_campaign(
    designs: &[Arc<dyn DesignPolicy>],
    scenarios: &[Scenario],
    settings: &CampaignSettings,
) -> Result<Vec<OperatingCharacteristics>> {
    let spec = designs[0].spec();
    for s in scenarios {
        s.validate(spec.phi)?;
    }
    let mut rows = Vec::with_capacity(scenarios.len() * designs.len());
    for scenario in scenarios {
        // results[replicate][design]
        let results: Vec<Vec<TrialResult>> = (0..settings.replicates)
            .into_par_iter()
            .map(|r| {
                let outcomes = outcomes_for(settings, r, spec.num_doses, spec.max_sample as usize);
                designs
                    .iter()
                    .map(|d| simulate(d.as_ref(), scenario, &outcomes))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for (k, design) in designs.iter().enumerate() {
            let trials: Vec<(usize, TrialResult)> = results
                .iter()
                .map(|per_design| (scenario.mtd_index, per_design[k].clone()))
                .collect();
            rows.push(summarize(
                design.as_ref(),
                &scenario.label,
                &trials,
                settings.poor_allocation,
            ));
        }
    }
    Ok(rows)
}

fn random_campaign(
    designs: &[Arc<dyn DesignPolicy>],
    config: &ScenarioGenConfig,
    phi: f64,
    label: &str,
    settings: &CampaignSettings,
) -> Result<Vec<OperatingCharacteristics>> {
    config.validate()?;
    let spec = designs[0].spec();
    if phi != spec.phi {
        return Err(Error::parameter(
            "phi",
            format!("scenario target {phi} differs from the design target {}", spec.phi),
        ));
    }
    let results: Vec<(usize, Vec<TrialResult>)> = (0..settings.replicates)
        .into_par_iter()
        .map(|r| {
            let noise = ScenarioNoise::draw(&mut substream(settings.seed, SCENARIO_STREAM, r), spec.num_doses);
            let scenario = Scenario {
                label: String::new(),
                probs: noise.probabilities(config, phi),
                mtd_index: noise.mtd,
                meta: None,
            };
            let outcomes = outcomes_for(settings, r, spec.num_doses, spec.max_sample as usize);
            let per_design = designs
                .iter()
                .map(|d| simulate(d.as_ref(), &scenario, &outcomes))
                .collect::<Result<Vec<_>>>()?;
            Ok((scenario.mtd_index, per_design))
        })
        .collect::<Result<_>>()?;
    Ok(designs
        .iter()
        .enumerate()
        .map(|(k, design)| {
            let trials: Vec<(usize, TrialResult)> = results.iter().map(|(mtd, t)| (*mtd, t[k].clone())).collect();
            summarize(design.as_ref(), label, &trials, settings.poor_allocation)
        })
        .collect())
}
