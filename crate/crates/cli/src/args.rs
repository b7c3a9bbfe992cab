//! Flags shared by several subcommands and their conversion to library types.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use boin_core::{BoundaryFamily, DesignSpec, DoseCounts, EliminationRule, Error, Result};
use boin_sim::ScenarioGenConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Markdown,
    Json,
}

impl Format {
    pub(crate) fn name(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Csv => "csv",
            Format::Markdown => "markdown",
            Format::Json => "json",
        }
    }
}

/// Rejects formats a subcommand does not produce.
pub(crate) fn require_format(format: Format, allowed: &[Format], command: &str) -> Result<()> {
    if allowed.contains(&format) {
        return Ok(());
    }
    let names: Vec<&str> = allowed.iter().map(|f| f.name()).collect();
    Err(Error::parameter(
        "format",
        format!("{command} writes {}, not {}", names.join(" or "), format.name()),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    #[value(alias = "local-optimal")]
    Local,
    #[value(alias = "global-optimal")]
    Global,
}

impl From<Family> for BoundaryFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Local => BoundaryFamily::Local,
            Family::Global => BoundaryFamily::Global,
        }
    }
}

/// Design parameters. `phi1` and `phi2` default to `0.6 phi` and `1.4 phi`.
#[derive(Clone, Debug, Args)]
pub struct SpecArgs {
    /// Target toxicity rate.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Highest subtherapeutic rate [default: 0.6 phi].
    #[arg(long)]
    pub phi1: Option<f64>,
    /// Lowest overly toxic rate [default: 1.4 phi].
    #[arg(long)]
    pub phi2: Option<f64>,
    #[arg(long, default_value_t = 6)]
    pub doses: usize,
    /// Total patient budget.
    #[arg(long, default_value_t = 36)]
    pub max_sample: u32,
    #[arg(long, default_value_t = 3)]
    pub cohort_size: u32,
    /// Posterior cutoff of the elimination rule.
    #[arg(long, default_value_t = 0.95)]
    pub elim_threshold: f64,
    /// Beta prior of the elimination rule, as `a,b`.
    #[arg(long, default_value = "1,1")]
    pub elim_prior: String,
    #[arg(long, default_value_t = 3)]
    pub elim_min_n: u32,
    #[arg(long)]
    pub no_elimination: bool,
    /// JSON design spec; replaces all the flags above.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
}

impl SpecArgs {
    /// Builds and validates the spec. `default_phi` applies when `--phi` is
    /// absent; without one the flag is required.
    pub fn build(&self, default_phi: Option<f64>) -> Result<DesignSpec> {
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::parameter("spec", format!("{}: {e}", path.display())))?;
            let spec: DesignSpec = serde_json::from_str(&text)
                .map_err(|e| Error::parameter("spec", format!("{}: {e}", path.display())))?;
            spec.validate()?;
            return Ok(spec);
        }
        let phi = self
            .phi
            .or(default_phi)
            .ok_or_else(|| Error::parameter("phi", "--phi is required"))?;
        let mut spec = DesignSpec::with_target(phi)
            .doses(self.doses)
            .sample(self.max_sample, self.cohort_size);
        spec.phi1 = self.phi1.unwrap_or(spec.phi1);
        spec.phi2 = self.phi2.unwrap_or(spec.phi2);
        spec.elimination = if self.no_elimination {
            None
        } else {
            Some(EliminationRule {
                threshold: self.elim_threshold,
                min_n: self.elim_min_n,
                prior: parse_pair(&self.elim_prior, "elim-prior")?,
            })
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Args)]
pub struct GeneratorArgs {
    #[arg(long, default_value_t = 0.05)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 0.35)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 0.35)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu2: f64,
}

impl GeneratorArgs {
    pub fn config(&self) -> Result<ScenarioGenConfig> {
        let c = ScenarioGenConfig {
            sigma0: self.sigma0,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            mu1: self.mu1,
            mu2: self.mu2,
        };
        c.validate()?;
        Ok(c)
    }
}

fn parse_pair(text: &str, field: &str) -> Result<(f64, f64)> {
    let bad = || Error::parameter(field, format!("expected 'a,b', got '{text}'"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

/// Parses `n/m` pairs separated by commas, one per dose from dose 1.
pub fn parse_counts(text: &str) -> Result<Vec<DoseCounts>> {
    text.split(',')
        .enumerate()
        .map(|(j, item)| {
            let item = item.trim();
            let bad = || {
                Error::parameter(
                    "counts",
                    format!("dose {}: expected 'patients/toxicities', got '{item}'", j + 1),
                )
            };
            let (n, m) = item.split_once('/').ok_or_else(bad)?;
            let n: u32 = n.trim().parse().map_err(|_| bad())?;
            let m: u32 = m.trim().parse().map_err(|_| bad())?;
            if m > n {
                return Err(Error::parameter(
                    "counts",
                    format!("dose {}: toxicities ({m}) exceed patients ({n})", j + 1),
                ));
            }
            Ok(DoseCounts::new(n, m))
        })
        .collect()
}

/// Pads `counts` with untreated doses up to `num_doses`.
pub fn pad_counts(mut counts: Vec<DoseCounts>, num_doses: usize) -> Result<Vec<DoseCounts>> {
    if counts.len() > num_doses {
        return Err(Error::parameter(
            "counts",
            format!("{} doses given, the design has {num_doses}", counts.len()),
        ));
    }
    counts.resize(num_doses, DoseCounts::default());
    Ok(counts)
}

/// Converts a one-based dose flag to an index.
pub fn dose_index(dose: usize, num_doses: usize, field: &str) -> Result<usize> {
    if dose == 0 || dose > num_doses {
        return Err(Error::parameter(field, format!("dose {dose} outside 1..={num_doses}")));
    }
    Ok(dose - 1)
}
