//! One-parameter power-model continual reassessment method.
//!
//! The model is `p_j = a_j^exp(alpha)` with `alpha ~ N(0, prior_sd^2)`.
//! Posterior summaries are one-dimensional integrals over the standardized
//! parameter `t = alpha / prior_sd`, evaluated by composite Gauss-Legendre
//! quadrature on the effective support of the posterior.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use boin_core::special::gauss_legendre;
use boin_core::{Decision, DesignSpec, DoseCounts, Error, Result, Termination, TrialState};

/// Skeleton used in the comparison study for six doses.
pub const DEFAULT_SKELETON: [f64; 6] = [0.01, 0.08, 0.25, 0.46, 0.65, 0.79];

/// Point estimate of the dose-toxicity curve used for dosing and selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrmEstimate {
    /// Posterior mean of each `p_j`.
    #[default]
    PosteriorMean,
    /// `a_j` raised to `exp` of the posterior mean of `alpha`.
    PlugIn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrmConfig {
    pub skeleton: Vec<f64>,
    pub prior_sd: f64,
    /// Move at most one level per cohort. Only `true` is supported.
    pub no_skip: bool,
    /// Doses with `Pr(p_j > phi | data)` above this are not assigned or
    /// selected; `None` disables the safety rule.
    pub safety_threshold: Option<f64>,
    pub estimate: CrmEstimate,
}

impl Default for CrmConfig {
    fn default() -> Self {
        CrmConfig {
            skeleton: DEFAULT_SKELETON.to_vec(),
            prior_sd: 1.24,
            no_skip: true,
            safety_threshold: Some(0.95),
            estimate: CrmEstimate::PosteriorMean,
        }
    }
}

impl CrmConfig {
    pub fn validate(&self, num_doses: usize) -> Result<()> {
        validate_skeleton(&self.skeleton)?;
        if self.skeleton.len() != num_doses {
            return Err(Error::parameter(
                "skeleton",
                format!("has {} entries for {num_doses} doses", self.skeleton.len()),
            ));
        }
        validate_sd(self.prior_sd)?;
        if !self.no_skip {
            return Err(Error::parameter(
                "no_skip",
                "dose skipping is not supported; decisions move one level at a time",
            ));
        }
        if let Some(t) = self.safety_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::parameter(
                    "safety_threshold",
                    format!("must lie in (0, 1), got {t}"),
                ));
            }
        }
        Ok(())
    }
}

fn validate_skeleton(skeleton: &[f64]) -> Result<()> {
    if skeleton.is_empty() {
        return Err(Error::parameter("skeleton", "must not be empty"));
    }
    if skeleton.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::parameter("skeleton", "entries must lie in (0, 1)"));
    }
    if skeleton.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::parameter("skeleton", "must be strictly increasing"));
    }
    Ok(())
}

fn validate_sd(sd: f64) -> Result<()> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::parameter("prior_sd", format!("must be positive, got {sd}")));
    }
    Ok(())
}

/// Log posterior density of `t = alpha / sd` up to a constant. The prior
/// contributes curvature 1 and every likelihood term is concave, so the
/// density is strongly log-concave.
struct LogPosterior<'a> {
    log_skeleton: Vec<f64>,
    counts: &'a [DoseCounts],
    sd: f64,
}

impl LogPosterior<'_> {
    fn eval(&self, t: f64) -> f64 {
        let scale = (self.sd * t).exp();
        let mut ll = -0.5 * t * t;
        for (c, &la) in self.counts.iter().zip(&self.log_skeleton) {
            if c.n == 0 {
                continue;
            }
            let log_p = scale * la;
            ll += c.m as f64 * log_p;
            if c.n > c.m {
                ll += (c.n - c.m) as f64 * (-log_p.exp_m1()).ln();
            }
        }
        ll
    }

    /// First and second derivatives in `t`.
    fn slope_curvature(&self, t: f64) -> (f64, f64) {
        let s = self.sd;
        let scale = (s * t).exp();
        let (mut d1, mut d2) = (-t, -1.0);
        for (c, &la) in self.counts.iter().zip(&self.log_skeleton) {
            if c.n == 0 {
                continue;
            }
            // l = log p_j, and dl/dalpha = l
            let l = scale * la;
            d1 += c.m as f64 * s * l;
            d2 += c.m as f64 * s * s * l;
            if c.n > c.m {
                let q = -l.exp_m1();
                let r = l.exp() * l / q;
                let k = (c.n - c.m) as f64;
                d1 -= k * s * r;
                d2 -= k * s * s * r * (1.0 + l / q);
            }
        }
        (d1, d2)
    }

    /// Posterior mode by safeguarded Newton on the (decreasing) slope.
    fn mode(&self) -> Result<f64> {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.slope_curvature(lo).0 < 0.0 {
            lo *= 2.0;
            if lo < -1e3 {
                return Err(Error::Numerical("CRM posterior mode below alpha/sd = -1000".into()));
            }
        }
        while self.slope_curvature(hi).0 > 0.0 {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::Numerical("CRM posterior mode above alpha/sd = 1000".into()));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (d1, d2) = self.slope_curvature(t);
            if !(d1.is_finite() && d2.is_finite()) {
                return Err(Error::Numerical(format!("CRM posterior slope is not finite at {t}")));
            }
            if d1 > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - d1 / d2;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 1e-12 * (1.0 + t.abs()) || hi - lo <= 1e-12 {
                return Ok(next);
            }
            t = next;
        }
        Ok(t)
    }
}

/// Gauss-Legendre order on each piece.
const GL_ORDER: usize = 10;
/// Equal pieces across the effective support, before splitting at cuts.
const PIECES: usize = 16;
/// The support ends where the log density is this far below its peak.
const LOG_DROP: f64 = 40.0;

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Distance from the mode to where the density has dropped by `LOG_DROP`,
/// overshooting by at most half.
fn reach(lp: &LogPosterior, mode: f64, top: f64, direction: f64, start: f64) -> f64 {
    let mut d = start;
    while lp.eval(mode + direction * d) > top - LOG_DROP {
        d *= 1.5;
    }
    d
}

/// Posterior summaries of the power model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrmPosterior {
    /// Posterior mean of each `p_j`.
    pub mean: Vec<f64>,
    /// Posterior mean of `alpha`.
    pub alpha_mean: f64,
    /// `Pr(p_j > phi | data)` when a target was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overdose: Option<Vec<f64>>,
}

fn posterior_parts<'a>(skeleton: &[f64], prior_sd: f64, counts: &'a [DoseCounts]) -> Result<LogPosterior<'a>> {
    validate_skeleton(skeleton)?;
    validate_sd(prior_sd)?;
    if counts.len() != skeleton.len() {
        return Err(Error::parameter(
            "counts",
            format!("expected {} doses, got {}", skeleton.len(), counts.len()),
        ));
    }
    if let Some(c) = counts.iter().find(|c| c.m > c.n) {
        return Err(Error::parameter(
            "counts",
            format!("toxicities ({}) exceed patients ({})", c.m, c.n),
        ));
    }
    Ok(LogPosterior {
        log_skeleton: skeleton.iter().map(|a| a.ln()).collect(),
        counts,
        sd: prior_sd,
    })
}

/// Posterior means and, given `phi`, overdose probabilities in one pass.
///
/// The integrals over `t = alpha / sd` use composite Gauss-Legendre rules on
/// the region around the mode where the density is within `e^-40` of its
/// peak. Since `p_j > phi` iff `t` lies below a dose-specific cut, pieces are
/// split at the cuts and each overdose probability is the mass accumulated
/// below its cut.
pub fn crm_posterior_summary(
    skeleton: &[f64],
    prior_sd: f64,
    counts: &[DoseCounts],
    phi: Option<f64>,
) -> Result<CrmPosterior> {
    if let Some(phi) = phi {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::parameter("phi", format!("must lie in (0, 1), got {phi}")));
        }
    }
    let lp = posterior_parts(skeleton, prior_sd, counts)?;
    let j = skeleton.len();
    let mode = lp.mode()?;
    let top = lp.eval(mode);
    let width = (-lp.slope_curvature(mode).1).sqrt().recip();
    let lower = mode - reach(&lp, mode, top, -1.0, 2.0 * width);
    let upper = mode + reach(&lp, mode, top, 1.0, 2.0 * width);

    let cuts: Vec<f64> = match phi {
        Some(phi) => lp
            .log_skeleton
            .iter()
            .map(|la| (phi.ln() / la).ln() / prior_sd)
            .collect(),
        None => Vec::new(),
    };
    let mut breaks: Vec<f64> = (0..=PIECES)
        .map(|i| lower + (upper - lower) * i as f64 / PIECES as f64)
        .chain(cuts.iter().copied().filter(|&c| c > lower && c < upper))
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let (nodes, weights) = gl_rule();
    let mut z = 0.0;
    let mut alpha = 0.0;
    let mut mean = vec![0.0; j];
    let mut below = vec![0.0; cuts.len()];
    let mut next_cut = 0;
    for piece in breaks.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        while next_cut < cuts.len() && cuts[next_cut] <= a {
            below[next_cut] = z;
            next_cut += 1;
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in nodes.iter().zip(weights) {
            let t = mid + half * x;
            let d = half * w * (lp.eval(t) - top).exp();
            z += d;
            alpha += d * prior_sd * t;
            let scale = (prior_sd * t).exp();
            for (m, la) in mean.iter_mut().zip(&lp.log_skeleton) {
                *m += d * (scale * la).exp();
            }
        }
    }
    for b in &mut below[next_cut..] {
        *b = z;
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Numerical(format!("CRM posterior normalizer is {z}")));
    }
    Ok(CrmPosterior {
        mean: mean.iter().map(|v| v / z).collect(),
        alpha_mean: alpha / z,
        overdose: phi.map(|_| below.iter().map(|v| (v / z).clamp(0.0, 1.0)).collect()),
    })
}

/// Posterior mean toxicity estimate at every dose.
pub fn crm_posterior(skeleton: &[f64], prior_sd: f64, counts: &[DoseCounts]) -> Result<Vec<f64>> {
    Ok(crm_posterior_summary(skeleton, prior_sd, counts, None)?.mean)
}

/// `Pr(p_j > phi | data)` for every dose.
pub fn crm_overdose_probabilities(
    skeleton: &[f64],
    prior_sd: f64,
    counts: &[DoseCounts],
    phi: f64,
) -> Result<Vec<f64>> {
    Ok(crm_posterior_summary(skeleton, prior_sd, counts, Some(phi))?
        .overdose
        .expect("target given"))
}

/// Dose whose estimate is closest to `phi` among the first `admissible`
/// doses; ties go to the lower dose.
pub fn crm_target(estimates: &[f64], phi: f64, admissible: usize) -> Option<usize> {
    (0..admissible.min(estimates.len())).min_by(|&a, &b| {
        let (da, db) = ((estimates[a] - phi).abs(), (estimates[b] - phi).abs());
        da.partial_cmp(&db).expect("finite estimates").then(a.cmp(&b))
    })
}

/// One-step move toward the dose whose estimate is closest to `phi`.
pub fn crm_decide(estimates: &[f64], phi: f64, current: usize, no_skip: bool) -> Result<Decision> {
    crm_decide_within(estimates, phi, current, no_skip, estimates.len())
}

/// [`crm_decide`] restricted to the lowest `admissible` doses.
pub fn crm_decide_within(
    estimates: &[f64],
    phi: f64,
    current: usize,
    no_skip: bool,
    admissible: usize,
) -> Result<Decision> {
    if !no_skip {
        return Err(Error::parameter("no_skip", "dose skipping is not supported"));
    }
    if current >= estimates.len() {
        return Err(Error::parameter(
            "current",
            format!("dose {} outside 1..={}", current + 1, estimates.len()),
        ));
    }
    let Some(target) = crm_target(estimates, phi, admissible) else {
        return Ok(Decision::TerminateTrial {
            reason: Termination::LowestDoseEliminated,
        });
    };
    Ok(match target.cmp(&current) {
        std::cmp::Ordering::Greater => Decision::Escalate,
        std::cmp::Ordering::Less => Decision::Deescalate,
        std::cmp::Ordering::Equal => Decision::Stay,
    })
}

/// CRM as a full design: model-based safety exclusion, one-step moves and
/// model-based selection.
#[derive(Clone, Debug)]
pub struct CrmPolicy {
    spec: DesignSpec,
    config: CrmConfig,
}

impl CrmPolicy {
    pub fn new(spec: DesignSpec, config: CrmConfig) -> Result<Self> {
        spec.validate()?;
        config.validate(spec.num_doses)?;
        Ok(CrmPolicy { spec, config })
    }

    pub fn config(&self) -> &CrmConfig {
        &self.config
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    /// Estimates used for dosing and the number of admissible doses.
    pub fn assess(&self, counts: &[DoseCounts]) -> Result<(Vec<f64>, usize)> {
        let phi = self.config.safety_threshold.map(|_| self.spec.phi);
        let post = crm_posterior_summary(&self.config.skeleton, self.config.prior_sd, counts, phi)?;
        let estimates = match self.config.estimate {
            CrmEstimate::PosteriorMean => post.mean,
            CrmEstimate::PlugIn => {
                let s = post.alpha_mean.exp();
                self.config.skeleton.iter().map(|a| a.powf(s)).collect()
            }
        };
        let admissible = match (self.config.safety_threshold, post.overdose) {
            (Some(th), Some(od)) => od.iter().position(|&p| p > th).unwrap_or(counts.len()),
            _ => counts.len(),
        };
        Ok((estimates, admissible))
    }

    pub fn decide(&self, state: &TrialState) -> Result<Decision> {
        state.validate(&self.spec)?;
        if state.terminated {
            return Err(Error::state("trial is terminated"));
        }
        if state.current_counts().n == 0 {
            return Err(Error::state(format!(
                "no patients treated at current dose {}",
                state.current + 1
            )));
        }
        let (estimates, admissible) = self.assess(&state.counts)?;
        if admissible == 0 {
            return Ok(Decision::TerminateTrial {
                reason: Termination::LowestDoseEliminated,
            });
        }
        if state.total_patients() >= self.spec.max_sample {
            return Ok(Decision::TerminateTrial {
                reason: Termination::SampleExhausted,
            });
        }
        crm_decide_within(
            &estimates,
            self.spec.phi,
            state.current,
            self.config.no_skip,
            admissible,
        )
    }

    /// Model-based MTD: admissible dose with estimate closest to the target.
    pub fn select(&self, state: &TrialState) -> Result<Option<usize>> {
        if state.eliminated_from == Some(0) {
            return Ok(None);
        }
        let (estimates, admissible) = self.assess(&state.counts)?;
        Ok(crm_target(&estimates, self.spec.phi, admissible))
    }
}
