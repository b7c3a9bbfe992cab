use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior probabilities that the current dose is at (`target`), below
/// (`below`) or above (`above`) the MTD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisPriors {
    pub target: f64,
    pub below: f64,
    pub above: f64,
}

impl HypothesisPriors {
    pub const EQUAL: HypothesisPriors = HypothesisPriors {
        target: 1.0 / 3.0,
        below: 1.0 / 3.0,
        above: 1.0 / 3.0,
    };

    pub fn is_equal(&self) -> bool {
        (self.target - self.below).abs() < 1e-15 && (self.target - self.above).abs() < 1e-15
    }

    fn validate(&self, dose: usize) -> Result<()> {
        let field = format!("priors[{}]", dose + 1);
        for v in [self.target, self.below, self.above] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::parameter(field, "prior probabilities must be non-negative"));
            }
        }
        let sum = self.target + self.below + self.above;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::parameter(
                field,
                format!("prior probabilities sum to {sum}, not 1"),
            ));
        }
        Ok(())
    }
}

impl Default for HypothesisPriors {
    fn default() -> Self {
        Self::EQUAL
    }
}

/// Posterior-probability safety rule: dose `j` and everything above it are
/// closed once `Pr(p_j > phi | data) > threshold` with at least `min_n`
/// patients treated at `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationRule {
    #[serde(default = "EliminationRule::default_threshold")]
    pub threshold: f64,
    #[serde(default = "EliminationRule::default_min_n")]
    pub min_n: u32,
    /// Beta prior `(a, b)` on the toxicity probability.
    #[serde(default = "EliminationRule::default_prior")]
    pub prior: (f64, f64),
}

impl EliminationRule {
    fn default_threshold() -> f64 {
        0.95
    }
    fn default_min_n() -> u32 {
        3
    }
    fn default_prior() -> (f64, f64) {
        (1.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::parameter(
                "elimination.threshold",
                format!("must lie in (0, 1), got {}", self.threshold),
            ));
        }
        let (a, b) = self.prior;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::parameter(
                "elimination.prior",
                format!("beta shapes must be positive, got ({a}, {b})"),
            ));
        }
        Ok(())
    }
}

impl Default for EliminationRule {
    fn default() -> Self {
        EliminationRule {
            threshold: Self::default_threshold(),
            min_n: Self::default_min_n(),
            prior: Self::default_prior(),
        }
    }
}

/// Parameters of an interval design.
///
/// `priors` may be left empty, which means the noninformative
/// `(1/3, 1/3, 1/3)` prior at every dose. Setting `elimination` to `None`
/// disables the safety rule entirely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub phi: f64,
    pub phi1: f64,
    pub phi2: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub priors: Vec<HypothesisPriors>,
    pub num_doses: usize,
    pub max_sample: u32,
    pub cohort_size: u32,
    #[serde(default = "default_elimination")]
    pub elimination: Option<EliminationRule>,
}

fn default_elimination() -> Option<EliminationRule> {
    Some(EliminationRule::default())
}

impl DesignSpec {
    /// Recommended defaults for a target rate: `phi1 = 0.6 phi`,
    /// `phi2 = 1.4 phi`, six doses, 36 patients in cohorts of three.
    pub fn with_target(phi: f64) -> Self {
        DesignSpec {
            phi,
            phi1: 0.6 * phi,
            phi2: 1.4 * phi,
            priors: Vec::new(),
            num_doses: 6,
            max_sample: 36,
            cohort_size: 3,
            elimination: default_elimination(),
        }
    }

    pub fn hypotheses(mut self, phi1: f64, phi2: f64) -> Self {
        self.phi1 = phi1;
        self.phi2 = phi2;
        self
    }

    pub fn doses(mut self, num_doses: usize) -> Self {
        self.num_doses = num_doses;
        self
    }

    pub fn sample(mut self, max_sample: u32, cohort_size: u32) -> Self {
        self.max_sample = max_sample;
        self.cohort_size = cohort_size;
        self
    }

    pub fn without_elimination(mut self) -> Self {
        self.elimination = None;
        self
    }

    pub fn priors_for(&self, dose: usize) -> HypothesisPriors {
        self.priors.get(dose).copied().unwrap_or_default()
    }

    /// True when every dose carries the same prior triple, so boundaries can
    /// be shared across doses.
    pub fn uniform_priors(&self) -> bool {
        self.priors.windows(2).all(|w| w[0] == w[1])
    }

    pub fn equal_priors(&self) -> bool {
        self.priors.iter().all(HypothesisPriors::is_equal)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_rates()?;
        if self.num_doses < 2 {
            return Err(Error::parameter("num_doses", "at least two doses are required"));
        }
        if !self.priors.is_empty() && self.priors.len() != self.num_doses {
            return Err(Error::parameter(
                "priors",
                format!("expected {} prior triples, got {}", self.num_doses, self.priors.len()),
            ));
        }
        for (j, p) in self.priors.iter().enumerate() {
            p.validate(j)?;
        }
        if self.cohort_size == 0 {
            return Err(Error::parameter("cohort_size", "must be at least 1"));
        }
        if self.max_sample == 0 || self.max_sample % self.cohort_size != 0 {
            return Err(Error::parameter(
                "max_sample",
                format!(
                    "must be a positive multiple of cohort_size ({}), got {}",
                    self.cohort_size, self.max_sample
                ),
            ));
        }
        if let Some(rule) = &self.elimination {
            rule.validate()?;
        }
        Ok(())
    }

    /// Checks `0 < phi1 < phi < phi2 < 1` only.
    // negated comparisons so that NaN is rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate_rates(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::parameter("phi", format!("must lie in (0, 1), got {}", self.phi)));
        }
        if !(self.phi1 > 0.0) {
            return Err(Error::parameter("phi1", format!("must be positive, got {}", self.phi1)));
        }
        if !(self.phi1 < self.phi) {
            return Err(Error::parameter(
                "phi1",
                format!("phi1 < phi violated ({} >= {})", self.phi1, self.phi),
            ));
        }
        if !(self.phi < self.phi2) {
            return Err(Error::parameter(
                "phi2",
                format!("phi < phi2 violated ({} >= {})", self.phi, self.phi2),
            ));
        }
        if !(self.phi2 < 1.0) {
            return Err(Error::parameter("phi2", format!("must be below 1, got {}", self.phi2)));
        }
        Ok(())
    }

    pub(crate) fn check_dose(&self, dose: usize) -> Result<()> {
        if dose >= self.num_doses {
            return Err(Error::parameter(
                "dose",
                format!("dose index {} outside 1..={}", dose + 1, self.num_doses),
            ));
        }
        Ok(())
    }
}
