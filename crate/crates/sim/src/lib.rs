//! Simulation of phase I dose-finding designs.
//!
//! Scenarios come from the fixed comparison set, scenario files, or a random
//! generator. Trials are replicated with common random numbers across
//! designs and summarized as operating characteristics.

pub mod campaign;
pub mod config;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod trial;

pub use campaign::{
    run_campaign, CampaignSettings, Estimate, OperatingCharacteristics, PoorAllocationRule, ScenarioSource,
};
pub use config::{CampaignConfig, CampaignMetadata, DesignEntry, ResolvedCampaign, ScenarioSourceConfig};
pub use report::{csv_header, write_csv};
pub use rng::{substream, PatientOutcomes};
pub use scenario::{
    calibrate_mu, fixed_scenarios, generate_scenario, read_scenarios, Calibration, Scenario, ScenarioGenConfig,
    ScenarioNoise, ScenarioRecord,
};
pub use trial::{run_trial, simulate, TrialResult};
