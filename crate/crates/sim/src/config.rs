//! JSON campaign configuration and the metadata recorded next to results.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use boin_core::{DesignSpec, Error, Result};
use boin_designs::{build_design, DesignPolicy};

use crate::campaign::{CampaignSettings, PoorAllocationRule, ScenarioSource};
use crate::rng::{CALIBRATION_STREAM, OUTCOME_STREAM, SCENARIO_STREAM};
use crate::scenario::{calibrate_mu, fixed_scenarios, read_scenarios, Calibration, ScenarioGenConfig, ScenarioRecord};

/// A design by name, optionally with its JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignEntry {
    Name(String),
    Configured {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<Value>,
    },
}

impl DesignEntry {
    pub fn name(&self) -> &str {
        match self {
            DesignEntry::Name(n) | DesignEntry::Configured { name: n, .. } => n,
        }
    }

    pub fn config(&self) -> Option<&Value> {
        match self {
            DesignEntry::Name(_) => None,
            DesignEntry::Configured { config, .. } => config.as_ref(),
        }
    }
}

fn default_calibration_samples() -> u64 {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSourceConfig {
    #[serde(default)]
    pub generator: ScenarioGenConfig,
    /// When set, a shared `mu` is calibrated to this average gap and
    /// replaces the generator's `mu1` and `mu2`.
    #[serde(default)]
    pub target_gap: Option<f64>,
    #[serde(default = "default_calibration_samples")]
    pub calibration_samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSourceConfig {
    /// The printed fixed scenarios.
    Table4,
    /// Path to a JSON array of scenario records.
    File(PathBuf),
    Inline(Vec<ScenarioRecord>),
    Random(RandomSourceConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub designs: Vec<DesignEntry>,
    /// Defaults to the recommended spec for a target of 0.25.
    #[serde(default)]
    pub spec: Option<DesignSpec>,
    pub replicates: u64,
    pub seed: u64,
    pub scenario_source: ScenarioSourceConfig,
    #[serde(default)]
    pub poor_allocation: PoorAllocationRule,
}

/// A configuration with designs built, scenarios loaded and any
/// calibration done.
#[derive(Debug)]
pub struct ResolvedCampaign {
    pub designs: Vec<Arc<dyn DesignPolicy>>,
    pub source: ScenarioSource,
    pub settings: CampaignSettings,
    pub metadata: CampaignMetadata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamIds {
    pub outcome: u64,
    pub scenario: u64,
    pub calibration: u64,
}

/// Everything needed to rerun a campaign, written as a JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub replicates: u64,
    pub poor_allocation: PoorAllocationRule,
    pub spec: DesignSpec,
    pub designs: Vec<DesignEntry>,
    pub scenario_source: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub scenarios: Vec<ScenarioRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator: Option<ScenarioGenConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub calibration: Option<Calibration>,
    pub streams: StreamIds,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parameter("config", format!("invalid campaign config: {e}")))
    }

    /// Builds designs and scenarios. Relative scenario paths resolve against
    /// `base_dir`.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<ResolvedCampaign> {
        let spec = self.spec.clone().unwrap_or_else(|| DesignSpec::with_target(0.25));
        spec.validate()?;
        if self.designs.is_empty() {
            return Err(Error::parameter("designs", "at least one design is required"));
        }
        let designs = self
            .designs
            .iter()
            .map(|d| build_design(d.name(), spec.clone(), d.config()))
            .collect::<Result<Vec<_>>>()?;

        let mut scenarios_meta = Vec::new();
        let mut generator = None;
        let mut calibration = None;
        let (source, description) = match &self.scenario_source {
            ScenarioSourceConfig::Table4 => {
                if spec.num_doses != 6 {
                    return Err(Error::parameter(
                        "scenario_source",
                        "the fixed scenarios have six doses",
                    ));
                }
                (ScenarioSource::Fixed(fixed_scenarios()), "table4".to_string())
            }
            ScenarioSourceConfig::File(path) => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let file = File::open(&full)
                    .map_err(|e| Error::parameter("scenario_source", format!("{}: {e}", full.display())))?;
                let list = read_scenarios(file, spec.phi)?;
                (ScenarioSource::Fixed(list), format!("file:{}", path.display()))
            }
            ScenarioSourceConfig::Inline(records) => {
                let list = records
                    .iter()
                    .cloned()
                    .enumerate()
                    .map(|(i, r)| r.into_scenario(spec.phi, i))
                    .collect::<Result<Vec<_>>>()?;
                (ScenarioSource::Fixed(list), "inline".to_string())
            }
            ScenarioSourceConfig::Random(r) => {
                let mut config = r.generator;
                if let Some(gap) = r.target_gap {
                    let c = calibrate_mu(&config, gap, spec.phi, spec.num_doses, r.calibration_samples, self.seed)?;
                    config = config.with_mu(c.mu);
                    calibration = Some(c);
                }
                generator = Some(config);
                let label = match r.target_gap {
                    Some(g) => format!("random-gap-{g}"),
                    None => "random".to_string(),
                };
                (
                    ScenarioSource::Random {
                        config,
                        phi: spec.phi,
                        label: label.clone(),
                    },
                    label,
                )
            }
        };
        if let ScenarioSource::Fixed(list) = &source {
            for s in list {
                if s.num_doses() != spec.num_doses {
                    return Err(Error::parameter(
                        "scenario_source",
                        format!("{} has {} doses, spec has {}", s.label, s.num_doses(), spec.num_doses),
                    ));
                }
            }
            scenarios_meta = list.iter().map(ScenarioRecord::from).collect();
        }
        let settings = CampaignSettings {
            replicates: self.replicates,
            seed: self.seed,
            poor_allocation: self.poor_allocation,
            workers: None,
        };
        let metadata = CampaignMetadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            replicates: self.replicates,
            poor_allocation: self.poor_allocation,
            spec,
            designs: self.designs.clone(),
            scenario_source: description,
            scenarios: scenarios_meta,
            generator,
            calibration,
            streams: StreamIds {
                outcome: OUTCOME_STREAM,
                scenario: SCENARIO_STREAM,
                calibration: CALIBRATION_STREAM,
            },
        };
        Ok(ResolvedCampaign {
            designs,
            source,
            settings,
            metadata,
        })
    }
}
