//! Dose-toxicity scenarios: the fixed comparison set and the random
//! generator of Paoletti, O'Quigley and Maccario (2004).

use std::io::Read;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use boin_core::{Error, Result};

use crate::rng::{substream, CALIBRATION_STREAM};

/// Slack for the MTD-closest check; the mirrored neighbour can tie the MTD's
/// distance up to rounding.
const CLOSEST_TOL: f64 = 1e-9;

/// True toxicity probabilities with a designated MTD (zero-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub probs: Vec<f64>,
    pub mtd_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ScenarioMeta>,
}

/// Generation parameters of a random scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub seed: u64,
    pub index: u64,
}

impl Scenario {
    /// Scenario whose MTD is the dose closest to `phi` (lower dose on ties).
    pub fn closest_to(label: impl Into<String>, probs: Vec<f64>, phi: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::parameter("probs", "at least one dose is required"));
        }
        let mtd_index = (0..probs.len())
            .min_by(|&a, &b| {
                (probs[a] - phi)
                    .abs()
                    .partial_cmp(&(probs[b] - phi).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            })
            .expect("nonempty");
        let s = Scenario {
            label: label.into(),
            probs,
            mtd_index,
            meta: None,
        };
        s.validate(phi)?;
        Ok(s)
    }

    pub fn num_doses(&self) -> usize {
        self.probs.len()
    }

    /// Probabilities in `[0, 1]`, nondecreasing, with the MTD closest to `phi`.
    pub fn validate(&self, phi: f64) -> Result<()> {
        if self.probs.is_empty() {
            return Err(Error::parameter("probs", "at least one dose is required"));
        }
        if let Some(p) = self.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::parameter("probs", format!("{p} is not a probability")));
        }
        if self.probs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::parameter("probs", "must be nondecreasing in dose"));
        }
        if self.mtd_index >= self.probs.len() {
            return Err(Error::parameter(
                "mtd_index",
                format!("dose {} outside 1..={}", self.mtd_index + 1, self.probs.len()),
            ));
        }
        let d = (self.probs[self.mtd_index] - phi).abs();
        if let Some(j) = (0..self.probs.len()).find(|&j| (self.probs[j] - phi).abs() < d - CLOSEST_TOL) {
            return Err(Error::parameter(
                "mtd_index",
                format!(
                    "dose {} is closer to the target than the designated MTD (dose {})",
                    j + 1,
                    self.mtd_index + 1
                ),
            ));
        }
        Ok(())
    }

    /// Mean of the one-sided probability gaps next to the MTD; a single gap
    /// when the MTD is at either end, zero for a single dose.
    pub fn average_gap(&self) -> f64 {
        let j = self.mtd_index;
        let p = &self.probs;
        let mut gaps = Vec::with_capacity(2);
        if j > 0 {
            gaps.push(p[j] - p[j - 1]);
        }
        if j + 1 < p.len() {
            gaps.push(p[j + 1] - p[j]);
        }
        if gaps.is_empty() {
            0.0
        } else {
            gaps.iter().sum::<f64>() / gaps.len() as f64
        }
    }
}

/// The printed fixed scenarios for a target of 0.25 and six doses.
pub fn fixed_scenarios() -> Vec<Scenario> {
    let table: [(&str, [f64; 6], usize); 5] = [
        ("scenario-1", [0.25, 0.35, 0.5, 0.6, 0.7, 0.8], 0),
        ("scenario-2", [0.03, 0.06, 0.1, 0.25, 0.35, 0.5], 3),
        ("scenario-3", [0.01, 0.04, 0.06, 0.1, 0.25, 0.35], 4),
        ("scenario-4", [0.05, 0.1, 0.25, 0.32, 0.5, 0.6], 2),
        ("scenario-5", [0.01, 0.02, 0.03, 0.04, 0.05, 0.25], 5),
    ];
    table
        .into_iter()
        .map(|(label, probs, mtd_index)| Scenario {
            label: label.into(),
            probs: probs.to_vec(),
            mtd_index,
            meta: None,
        })
        .collect()
}

/// Scenario file record. `mtd_index` is one-based; when omitted the dose
/// closest to the target is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRecord {
    #[serde(default)]
    pub label: Option<String>,
    pub probs: Vec<f64>,
    #[serde(default)]
    pub mtd_index: Option<usize>,
}

impl ScenarioRecord {
    pub fn into_scenario(self, phi: f64, position: usize) -> Result<Scenario> {
        let label = self.label.unwrap_or_else(|| format!("scenario-{}", position + 1));
        match self.mtd_index {
            None => Scenario::closest_to(label, self.probs, phi),
            Some(0) => Err(Error::parameter("mtd_index", "dose levels are numbered from 1")),
            Some(k) => {
                let s = Scenario {
                    label,
                    probs: self.probs,
                    mtd_index: k - 1,
                    meta: None,
                };
                s.validate(phi)?;
                Ok(s)
            }
        }
    }
}

impl From<&Scenario> for ScenarioRecord {
    fn from(s: &Scenario) -> Self {
        ScenarioRecord {
            label: Some(s.label.clone()),
            probs: s.probs.clone(),
            mtd_index: Some(s.mtd_index + 1),
        }
    }
}

/// Reads a JSON array of scenario records.
pub fn read_scenarios<R: Read>(reader: R, phi: f64) -> Result<Vec<Scenario>> {
    let records: Vec<ScenarioRecord> = serde_json::from_reader(reader)
        .map_err(|e| Error::parameter("scenarios", format!("invalid scenario file: {e}")))?;
    if records.is_empty() {
        return Err(Error::parameter("scenarios", "scenario file is empty"));
    }
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.into_scenario(phi, i))
        .collect()
}

/// Noise parameters of the random generator. The `mu` values have no
/// published defaults; see [`calibrate_mu`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGenConfig {
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for ScenarioGenConfig {
    fn default() -> Self {
        ScenarioGenConfig {
            sigma0: 0.05,
            sigma1: 0.35,
            sigma2: 0.35,
            mu1: 0.0,
            mu2: 0.0,
        }
    }
}

impl ScenarioGenConfig {
    pub fn with_mu(self, mu: f64) -> Self {
        ScenarioGenConfig {
            mu1: mu,
            mu2: mu,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("sigma0", self.sigma0),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::parameter(field, format!("must be positive, got {v}")));
            }
        }
        for (field, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !v.is_finite() {
                return Err(Error::parameter(field, "must be finite"));
            }
        }
        Ok(())
    }
}

/// The random part of a generated scenario: the MTD location and one
/// standard normal per dose. Keeping it separate from the noise parameters
/// lets calibration re-use the same draws for every candidate `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioNoise {
    pub mtd: usize,
    pub normals: Vec<f64>,
}

impl ScenarioNoise {
    pub fn draw<R: Rng>(rng: &mut R, num_doses: usize) -> Self {
        let mtd = rng.random_range(0..num_doses);
        let normals = (0..num_doses).map(|_| rng.sample(StandardNormal)).collect();
        ScenarioNoise { mtd, normals }
    }

    /// Probabilities for given noise parameters.
    ///
    /// The MTD gets `Phi(z(phi) + sigma0 w)`. Its neighbours are pushed out
    /// by squared normals, starting from the MTD mirrored about `phi` when
    /// that keeps the MTD closest; outer doses continue the same walk.
    pub fn probabilities(&self, config: &ScenarioGenConfig, phi: f64) -> Vec<f64> {
        let std = Normal::standard();
        let quantile = |p: f64| {
            if p <= 0.0 {
                f64::NEG_INFINITY
            } else if p >= 1.0 {
                f64::INFINITY
            } else {
                std.inverse_cdf(p)
            }
        };
        let (j, w, k) = (self.mtd, &self.normals, self.normals.len());
        let z_phi = quantile(phi);
        let mut z = vec![0.0; k];
        z[j] = z_phi + config.sigma0 * w[j];
        let p_j = std.cdf(z[j]);
        let mirrored = quantile(2.0 * phi - p_j);
        let step_down = |i: usize| (config.mu1 + config.sigma1 * w[i]).powi(2);
        let step_up = |i: usize| (config.mu2 + config.sigma2 * w[i]).powi(2);
        if j > 0 {
            let base = if z[j] > z_phi { mirrored } else { z[j] };
            z[j - 1] = base - step_down(j - 1);
            for i in (0..j - 1).rev() {
                z[i] = z[i + 1] - step_down(i);
            }
        }
        if j + 1 < k {
            let base = if z[j] < z_phi { mirrored } else { z[j] };
            z[j + 1] = base + step_up(j + 1);
            for i in j + 2..k {
                z[i] = z[i - 1] + step_up(i);
            }
        }
        z.into_iter().map(|v| std.cdf(v)).collect()
    }
}

/// Random scenario for `(seed, index)`; the MTD is the generator's chosen
/// dose.
pub fn generate_scenario(
    config: &ScenarioGenConfig,
    phi: f64,
    num_doses: usize,
    seed: u64,
    index: u64,
) -> Result<Scenario> {
    config.validate()?;
    check_target(phi)?;
    if num_doses == 0 {
        return Err(Error::parameter("num_doses", "at least one dose is required"));
    }
    let noise = ScenarioNoise::draw(&mut substream(seed, crate::rng::SCENARIO_STREAM, index), num_doses);
    Ok(Scenario {
        label: format!("random-{index}"),
        probs: noise.probabilities(config, phi),
        mtd_index: noise.mtd,
        meta: Some(ScenarioMeta {
            sigma0: config.sigma0,
            sigma1: config.sigma1,
            sigma2: config.sigma2,
            mu1: config.mu1,
            mu2: config.mu2,
            seed,
            index,
        }),
    })
}

fn check_target(phi: f64) -> Result<()> {
    if phi > 0.0 && phi < 0.5 {
        Ok(())
    } else {
        // the mirrored neighbour 2 phi - p needs room below 1
        Err(Error::parameter(
            "phi",
            format!("random scenarios need 0 < phi < 0.5, got {phi}"),
        ))
    }
}

/// Result of fitting a shared `mu = mu1 = mu2` to a target average gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_gap: f64,
    pub mu: f64,
    pub achieved_gap: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Mean [`Scenario::average_gap`] over pre-drawn noise.
pub fn mean_gap(noise: &[ScenarioNoise], config: &ScenarioGenConfig, phi: f64) -> f64 {
    let gaps: Vec<f64> = noise
        .par_iter()
        .map(|n| {
            let probs = n.probabilities(config, phi);
            Scenario {
                label: String::new(),
                probs,
                mtd_index: n.mtd,
                meta: None,
            }
            .average_gap()
        })
        .collect();
    gaps.iter().sum::<f64>() / gaps.len() as f64
}

/// Bisection on a shared `mu >= 0` so the Monte Carlo mean gap over
/// `samples` scenarios hits `target_gap`. The same draws are reused for
/// every candidate, so the search is deterministic given `seed`.
pub fn calibrate_mu(
    config: &ScenarioGenConfig,
    target_gap: f64,
    phi: f64,
    num_doses: usize,
    samples: u64,
    seed: u64,
) -> Result<Calibration> {
    config.validate()?;
    check_target(phi)?;
    if num_doses < 2 {
        return Err(Error::parameter("num_doses", "calibration needs at least two doses"));
    }
    if samples == 0 {
        return Err(Error::parameter("samples", "must be positive"));
    }
    if !(target_gap > 0.0 && target_gap < 1.0) {
        return Err(Error::parameter(
            "target_gap",
            format!("must lie in (0, 1), got {target_gap}"),
        ));
    }
    let noise: Vec<ScenarioNoise> = (0..samples)
        .into_par_iter()
        .map(|i| ScenarioNoise::draw(&mut substream(seed, CALIBRATION_STREAM, i), num_doses))
        .collect();
    let gap_at = |mu: f64| mean_gap(&noise, &config.with_mu(mu), phi);

    let floor = gap_at(0.0);
    if target_gap < floor {
        return Err(Error::parameter(
            "target_gap",
            format!("{target_gap} is below the smallest reachable gap {floor:.4} (mu = 0)"),
        ));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while gap_at(hi) < target_gap {
        lo = hi;
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::Numerical(format!("no mu up to 64 reaches gap {target_gap}")));
        }
    }
    for _ in 0..100 {
        if hi - lo < 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gap_at(mid) < target_gap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(Calibration {
        target_gap,
        mu,
        achieved_gap: gap_at(mu),
        samples,
        seed,
    })
}
