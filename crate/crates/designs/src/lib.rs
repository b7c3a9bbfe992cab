//! Dose-finding designs behind one interface.
//!
//! Every design except the CRM shares the posterior elimination rule and the
//! isotonic MTD selection of `boin-core`; the CRM uses its own model-based
//! exclusion and selection.

pub mod conduct;
pub mod crm;
mod policy;
pub mod rules;

use std::sync::Arc;

use boin_core::{BoundaryFamily, DesignSpec, Error, Result};
use serde::de::DeserializeOwned;
use serde_json::Value;

pub use conduct::{describe, recommend, DecisionRecord};
pub use crm::{crm_decide, crm_posterior, CrmConfig, CrmEstimate, CrmPolicy};
pub use policy::{CcdConfig, DesignPolicy, GroupUpDown, MtpiConfig, OptimalInterval, TabulatedInterval};
pub use rules::{ccd_decide, gud_decide, mtpi_decide, mtpi_upm};

/// Names accepted by [`build_design`].
pub const DESIGN_NAMES: [&str; 6] = ["local-optimal", "global-optimal", "gud", "ccd", "mtpi", "crm"];

fn parse_config<T: DeserializeOwned + Default>(name: &str, config: Option<&Value>) -> Result<T> {
    match config {
        None | Some(Value::Null) => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| Error::parameter("config", format!("invalid {name} config: {e}"))),
    }
}

fn reject_config(name: &str, config: Option<&Value>) -> Result<()> {
    match config {
        None | Some(Value::Null) => Ok(()),
        Some(Value::Object(map)) if map.is_empty() => Ok(()),
        Some(_) => Err(Error::parameter(
            "config",
            format!("{name} takes no config; its parameters live in the design spec"),
        )),
    }
}

/// Builds a registered design from its name and optional JSON config.
pub fn build_design(name: &str, spec: DesignSpec, config: Option<&Value>) -> Result<Arc<dyn DesignPolicy>> {
    Ok(match name {
        "local-optimal" => {
            reject_config(name, config)?;
            Arc::new(OptimalInterval::new(spec, BoundaryFamily::Local)?)
        }
        "global-optimal" => {
            reject_config(name, config)?;
            Arc::new(OptimalInterval::new(spec, BoundaryFamily::Global)?)
        }
        "gud" => {
            reject_config(name, config)?;
            Arc::new(GroupUpDown::new(spec)?)
        }
        "ccd" => Arc::new(TabulatedInterval::ccd(spec, parse_config(name, config)?)?),
        "mtpi" => Arc::new(TabulatedInterval::mtpi(spec, parse_config(name, config)?)?),
        "crm" => Arc::new(CrmPolicy::new(spec, parse_config(name, config)?)?),
        other => {
            return Err(Error::parameter(
                "design",
                format!("unknown design '{other}'; available: {}", DESIGN_NAMES.join(", ")),
            ))
        }
    })
}
