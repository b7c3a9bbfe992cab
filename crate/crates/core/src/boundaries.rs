//! Escalation and deescalation boundaries.
//!
//! Two families are provided:
//!
//! * **local**: boundaries minimizing the decision error under the point
//!   hypotheses `p = phi`, `p = phi1`, `p = phi2`. They have a closed form and,
//!   under equal hypothesis priors, do not depend on the dose or on `n`.
//! * **global**: integer cutoffs minimizing the decision error averaged over
//!   composite hypotheses with uniform conditional priors on
//!   `(phi1, phi2)`, `[0, phi1]` and `[phi2, 1]`. They are found by exhaustive
//!   search for each `n`; the minimizer coincides with the points where the
//!   posterior probability of the escalation (deescalation) hypothesis
//!   overtakes that of the target hypothesis, and both routes are computed
//!   and compared in debug builds.
//!
//! Cutoffs use closed boundaries on both sides: escalate iff `m <= b1`,
//! deescalate iff `m >= b2`.

use serde::{Deserialize, Serialize};

use crate::design::{DesignSpec, HypothesisPriors};
use crate::error::{Error, Result};
use crate::special::{binomial_cdf, binomial_pmf_all, gauss_legendre, integrate_gl};

/// Tolerance under which two error rates are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryFamily {
    Local,
    Global,
}

impl BoundaryFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryFamily::Local => "local",
            BoundaryFamily::Global => "global",
        }
    }
}

impl std::str::FromStr for BoundaryFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" | "local-optimal" => Ok(BoundaryFamily::Local),
            "global" | "global-optimal" => Ok(BoundaryFamily::Global),
            other => Err(Error::parameter(
                "design",
                format!("unknown boundary family '{other}' (expected local or global)"),
            )),
        }
    }
}

/// Raw dose-movement signal before edge adjustments and elimination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Escalate,
    Stay,
    Deescalate,
}

/// Integer cutoffs at a fixed `n`. `None` means the region is empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutoffs {
    /// Escalate iff `m <= escalate_max`.
    pub escalate_max: Option<u32>,
    /// Deescalate iff `m >= deescalate_min`.
    pub deescalate_min: Option<u32>,
}

impl Cutoffs {
    /// Builds cutoffs from the extended integer encoding used by the error
    /// rates: `b1 = -1` means never escalate, `b2 = n + 1` never deescalate.
    pub fn from_extended(n: u32, b1: i64, b2: i64) -> Self {
        Cutoffs {
            escalate_max: (b1 >= 0).then_some(b1 as u32),
            deescalate_min: (b2 <= n as i64).then_some(b2 as u32),
        }
    }

    pub fn extended(&self, n: u32) -> (i64, i64) {
        (
            self.escalate_max.map_or(-1, i64::from),
            self.deescalate_min.map_or(n as i64 + 1, i64::from),
        )
    }

    pub fn signal(&self, m: u32) -> Signal {
        if self.escalate_max.is_some_and(|b| m <= b) {
            Signal::Escalate
        } else if self.deescalate_min.is_some_and(|b| m >= b) {
            Signal::Deescalate
        } else {
            Signal::Stay
        }
    }
}

/// Boundaries on the observed toxicity rate at one dose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalBoundaries {
    /// Escalation boundary on `m/n`.
    pub lambda1: f64,
    /// Deescalation boundary on `m/n`.
    pub lambda2: f64,
    /// Patient count the boundaries were computed for; `None` when they hold
    /// for every `n`.
    pub n: Option<u32>,
    /// Exact integer cutoffs, present for the global family.
    pub cutoffs: Option<Cutoffs>,
    /// Large-sample limits of `(lambda1, lambda2)`.
    pub asymptotic: (f64, f64),
}

impl IntervalBoundaries {
    /// Integer cutoffs at `n`, derived by exact comparison of `m` against
    /// `n * lambda`.
    pub fn cutoffs_at(&self, n: u32) -> Cutoffs {
        if let (Some(c), Some(at)) = (self.cutoffs, self.n) {
            if at == n {
                return c;
            }
        }
        let nf = n as f64;
        let b1 = (nf * self.lambda1).floor();
        let b2 = (nf * self.lambda2).ceil();
        Cutoffs {
            escalate_max: (b1 >= 0.0).then(|| (b1 as u32).min(n)),
            deescalate_min: (b2 <= nf).then(|| b2.max(0.0) as u32),
        }
    }

    pub fn signal(&self, n: u32, m: u32) -> Signal {
        self.cutoffs_at(n).signal(m)
    }
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::parameter("n", "at least one patient is required"));
    }
    Ok(())
}

fn check_cutoffs(n: u32, b1: i64, b2: i64) -> Result<()> {
    if b1 < -1 || b1 > n as i64 {
        return Err(Error::parameter("b1", format!("must lie in -1..={n}, got {b1}")));
    }
    if b2 < 0 || b2 > n as i64 + 1 {
        return Err(Error::parameter("b2", format!("must lie in 0..={}, got {b2}", n + 1)));
    }
    if b1 >= b2 {
        return Err(Error::parameter(
            "b2",
            format!("cutoffs must satisfy b1 < b2, got ({b1}, {b2})"),
        ));
    }
    Ok(())
}

/// Closed-form local optimal boundaries for `dose` after `n` patients.
pub fn local_boundaries(spec: &DesignSpec, dose: usize, n: u32) -> Result<IntervalBoundaries> {
    spec.validate_rates()?;
    spec.check_dose(dose)?;
    check_n(n)?;
    let pri = spec.priors_for(dose);
    if pri.target <= 0.0 || pri.below <= 0.0 || pri.above <= 0.0 {
        return Err(Error::parameter(
            "priors",
            "local boundaries require strictly positive hypothesis priors",
        ));
    }
    let (phi, phi1, phi2) = (spec.phi, spec.phi1, spec.phi2);
    let den1 = (phi * (1.0 - phi1) / (phi1 * (1.0 - phi))).ln();
    let den2 = (phi2 * (1.0 - phi) / (phi * (1.0 - phi2))).ln();
    let base1 = ((1.0 - phi1) / (1.0 - phi)).ln();
    let base2 = ((1.0 - phi) / (1.0 - phi2)).ln();
    let inv_n = 1.0 / n as f64;

    let (lambda1, lambda2, at) = if pri.is_equal() {
        (base1 / den1, base2 / den2, None)
    } else {
        (
            (base1 + inv_n * (pri.below / pri.target).ln()) / den1,
            (base2 + inv_n * (pri.target / pri.above).ln()) / den2,
            Some(n),
        )
    };
    Ok(IntervalBoundaries {
        lambda1,
        lambda2,
        n: at,
        cutoffs: None,
        asymptotic: (base1 / den1, base2 / den2),
    })
}

/// Decision error rate under the three point hypotheses for the rule
/// "escalate iff `m <= b1`, deescalate iff `m >= b2`".
///
/// `b1 = -1` encodes an empty escalation region and `b2 = n + 1` an empty
/// deescalation region.
pub fn local_error_rate(spec: &DesignSpec, dose: usize, n: u32, b1: i64, b2: i64) -> Result<f64> {
    spec.validate_rates()?;
    spec.check_dose(dose)?;
    check_n(n)?;
    check_cutoffs(n, b1, b2)?;
    let pri = spec.priors_for(dose);
    let at_target = binomial_cdf(b1, n, spec.phi) + 1.0 - binomial_cdf(b2 - 1, n, spec.phi);
    let below = 1.0 - binomial_cdf(b1, n, spec.phi1);
    let above = binomial_cdf(b2 - 1, n, spec.phi2);
    Ok(pri.target * at_target + pri.below * below + pri.above * above)
}

/// Prior-weighted marginal likelihoods `pr(H_k) f(y | H_k)` of each
/// composite hypothesis for `y = 0..=n`.
#[derive(Clone, Debug)]
pub struct CompositeMarginals {
    pub n: u32,
    pub target: Vec<f64>,
    pub below: Vec<f64>,
    pub above: Vec<f64>,
    priors: HypothesisPriors,
}

impl CompositeMarginals {
    pub fn new(spec: &DesignSpec, dose: usize, n: u32) -> Result<Self> {
        spec.validate_rates()?;
        spec.check_dose(dose)?;
        check_n(n)?;
        Ok(Self::compute(spec.phi1, spec.phi2, spec.priors_for(dose), n))
    }

    fn compute(phi1: f64, phi2: f64, priors: HypothesisPriors, n: u32) -> Self {
        // Integrals of the binomial likelihood over p reduce to tails of
        // Bin(n + 1, x): the integral over [0, x] of C(n,y) p^y (1-p)^(n-y)
        // equals P(Bin(n+1, x) >= y+1) / (n+1).
        let len = n as usize + 1;
        let pmf1 = binomial_pmf_all(n + 1, phi1);
        let pmf2 = binomial_pmf_all(n + 1, phi2);
        let lower1 = prefix_sums(&pmf1);
        let lower2 = prefix_sums(&pmf2);
        let upper1 = suffix_sums(&pmf1);
        let upper2 = suffix_sums(&pmf2);

        let scale = 1.0 / (n as f64 + 1.0);
        let mut target = Vec::with_capacity(len);
        let mut below = Vec::with_capacity(len);
        let mut above = Vec::with_capacity(len);
        for y in 0..len {
            // mass of (phi1, phi2): pick the representation without cancellation
            let mid = if 2 * y < len {
                lower1[y] - lower2[y]
            } else {
                upper2[y + 1] - upper1[y + 1]
            };
            target.push(priors.target * mid.max(0.0) * scale / (phi2 - phi1));
            below.push(priors.below * upper1[y + 1] * scale / phi1);
            above.push(priors.above * lower2[y] * scale / (1.0 - phi2));
        }
        CompositeMarginals {
            n,
            target,
            below,
            above,
            priors,
        }
    }

    /// Global decision error for the extended cutoffs `(b1, b2)`.
    pub fn error_rate(&self, b1: i64, b2: i64) -> f64 {
        let esc: f64 = (0..=b1.max(-1))
            .filter(|&y| y >= 0)
            .map(|y| self.target[y as usize] - self.below[y as usize])
            .sum();
        let keep: f64 = (0..b2).map(|y| self.above[y as usize] - self.target[y as usize]).sum();
        self.priors.target + self.priors.below + esc + keep
    }

    /// Exhaustive minimization over `-1 <= b1 < b2 <= n + 1`.
    ///
    /// Ties within [`TIE_TOLERANCE`] go to the smaller `b1` and then the larger
    /// `b2`, i.e. the narrower escalation region and wider retention region.
    pub fn minimize(&self) -> (i64, i64, f64) {
        let n = self.n as i64;
        let len = self.n as usize + 1;
        // esc_cum[k] = sum over y < k of (target - below); index k = b1 + 1
        let mut esc_cum = vec![0.0; len + 1];
        // keep_cum[k] = sum over y < k of (above - target); index k = b2
        let mut keep_cum = vec![0.0; len + 1];
        for y in 0..len {
            esc_cum[y + 1] = esc_cum[y] + self.target[y] - self.below[y];
            keep_cum[y + 1] = keep_cum[y] + self.above[y] - self.target[y];
        }
        // best b2 >= k, preferring the larger index on ties
        let mut best_from = vec![(0.0, 0i64); len + 2];
        let mut cur = (keep_cum[len], n + 1);
        best_from[len] = cur;
        for k in (0..len).rev() {
            if keep_cum[k] < cur.0 - TIE_TOLERANCE {
                cur = (keep_cum[k], k as i64);
            }
            best_from[k] = cur;
        }
        let base = self.priors.target + self.priors.below;
        let mut best: Option<(i64, i64, f64)> = None;
        for b1 in -1..=n {
            let (keep, b2) = best_from[(b1 + 1) as usize];
            let value = base + esc_cum[(b1 + 1) as usize] + keep;
            if best.is_none_or(|(_, _, v)| value < v - TIE_TOLERANCE) {
                best = Some((b1, b2, value));
            }
        }
        best.expect("search space is never empty")
    }

    /// Cutoffs from the posterior-crossing characterization: escalate where
    /// the escalation hypothesis is strictly more probable a posteriori than
    /// the target hypothesis, deescalate where the deescalation hypothesis
    /// is. Differences within [`TIE_TOLERANCE`] count as ties and keep the
    /// current dose.
    pub fn crossing(&self) -> (i64, i64) {
        let len = self.n as usize + 1;
        let b1 = (0..len)
            .rev()
            .find(|&y| self.below[y] - self.target[y] > TIE_TOLERANCE)
            .map_or(-1, |y| y as i64);
        let b2 = (0..len)
            .find(|&y| self.above[y] - self.target[y] > TIE_TOLERANCE)
            .map_or(self.n as i64 + 1, |y| y as i64);
        (b1, b2)
    }
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    for x in v {
        acc += x;
        out.push(acc.min(1.0));
    }
    out
}

fn suffix_sums(v: &[f64]) -> Vec<f64> {
    // out[k] = sum over i >= k; out[len] = 0
    let mut out = vec![0.0; v.len() + 1];
    for k in (0..v.len()).rev() {
        out[k] = (out[k + 1] + v[k]).min(1.0);
    }
    out
}

/// Global decision error rate evaluated through the beta-CDF closed form.
pub fn global_error_rate(spec: &DesignSpec, dose: usize, n: u32, b1: i64, b2: i64) -> Result<f64> {
    check_n(n)?;
    check_cutoffs(n, b1, b2)?;
    Ok(CompositeMarginals::new(spec, dose, n)?.error_rate(b1, b2))
}

/// Global decision error rate by direct numerical integration of the
/// binomial decision probabilities against the uniform conditional priors.
///
/// The integrands are polynomials of degree `n` in `p`, so a Gauss-Legendre
/// rule with more than `n / 2` nodes integrates them exactly up to rounding.
pub fn global_error_rate_quadrature(spec: &DesignSpec, dose: usize, n: u32, b1: i64, b2: i64) -> Result<f64> {
    spec.validate_rates()?;
    spec.check_dose(dose)?;
    check_n(n)?;
    check_cutoffs(n, b1, b2)?;
    let pri = spec.priors_for(dose);
    let (phi1, phi2) = (spec.phi1, spec.phi2);
    let rule = gauss_legendre(n as usize / 2 + 8);

    let not_retain = |p: f64| binomial_cdf(b1, n, p) + 1.0 - binomial_cdf(b2 - 1, n, p);
    let not_escalate = |p: f64| 1.0 - binomial_cdf(b1, n, p);
    let not_deescalate = |p: f64| binomial_cdf(b2 - 1, n, p);

    let target = integrate_gl(not_retain, phi1, phi2, &rule) / (phi2 - phi1);
    let below = integrate_gl(not_escalate, 0.0, phi1, &rule) / phi1;
    let above = integrate_gl(not_deescalate, phi2, 1.0, &rule) / (1.0 - phi2);
    Ok(pri.target * target + pri.below * below + pri.above * above)
}

/// Global optimal boundaries for `dose` after `n` patients, reported as the
/// fractions `b1/n` and `b2/n` together with the exact integer cutoffs.
pub fn global_boundaries(spec: &DesignSpec, dose: usize, n: u32) -> Result<IntervalBoundaries> {
    if n > spec.max_sample {
        return Err(Error::parameter(
            "n",
            format!("{n} exceeds the sample budget {}", spec.max_sample),
        ));
    }
    let marginals = CompositeMarginals::new(spec, dose, n)?;
    let cutoffs = global_cutoffs_from(&marginals);
    let (b1, b2) = cutoffs.extended(n);
    Ok(IntervalBoundaries {
        lambda1: b1 as f64 / n as f64,
        lambda2: b2 as f64 / n as f64,
        n: Some(n),
        cutoffs: Some(cutoffs),
        asymptotic: (spec.phi1, spec.phi2),
    })
}

fn global_cutoffs_from(marginals: &CompositeMarginals) -> Cutoffs {
    let (b1, b2, _) = marginals.minimize();
    debug_assert_eq!(
        (b1, b2),
        marginals.crossing(),
        "error-rate search and posterior crossing disagree at n={}",
        marginals.n
    );
    Cutoffs::from_extended(marginals.n, b1, b2)
}

/// Global optimal cutoffs for every `n` in `1..=n_max`, index `n - 1`.
pub fn global_cutoff_table(spec: &DesignSpec, dose: usize, n_max: u32) -> Result<Vec<Cutoffs>> {
    spec.validate_rates()?;
    spec.check_dose(dose)?;
    let priors = spec.priors_for(dose);
    Ok((1..=n_max)
        .map(|n| global_cutoffs_from(&CompositeMarginals::compute(spec.phi1, spec.phi2, priors, n)))
        .collect())
}
