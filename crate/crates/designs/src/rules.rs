//! Stateless dose-transition rules of the comparator designs.

use boin_core::special::beta_inc;
use boin_core::{resolve_signal, Decision, Error, Result, Signal};

fn check_counts(n: u32, m: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::parameter("n", "at least one patient is required"));
    }
    if m > n {
        return Err(Error::parameter("m", format!("toxicities ({m}) exceed patients ({n})")));
    }
    Ok(())
}

fn check_dose(current: usize, num_doses: usize) -> Result<()> {
    if current >= num_doses {
        return Err(Error::parameter(
            "current",
            format!("dose {} outside 1..={num_doses}", current + 1),
        ));
    }
    Ok(())
}

/// Group up-and-down signal: escalate after a toxicity-free cohort,
/// deescalate after any toxicity.
pub fn gud_signal(last_cohort_toxicities: u32, cohort_size: u32) -> Result<Signal> {
    if last_cohort_toxicities > cohort_size {
        return Err(Error::parameter(
            "toxicities",
            format!("toxicities ({last_cohort_toxicities}) exceed cohort size ({cohort_size})"),
        ));
    }
    Ok(if last_cohort_toxicities == 0 {
        Signal::Escalate
    } else {
        Signal::Deescalate
    })
}

pub fn gud_decide(last_cohort_toxicities: u32, cohort_size: u32, current: usize, num_doses: usize) -> Result<Decision> {
    check_dose(current, num_doses)?;
    let s = gud_signal(last_cohort_toxicities, cohort_size)?;
    Ok(resolve_signal(s, current, num_doses, None))
}

/// Cumulative cohort design signal with tolerance interval `phi +/- delta`,
/// closed on both ends.
pub fn ccd_signal(n: u32, m: u32, phi: f64, delta: f64) -> Result<Signal> {
    check_counts(n, m)?;
    if !(delta > 0.0 && delta < phi.min(1.0 - phi)) {
        return Err(Error::parameter(
            "delta",
            format!("must lie in (0, min(phi, 1 - phi)), got {delta}"),
        ));
    }
    // compare m against n * bound with a relative guard for representation error
    let (mf, nf) = (m as f64, n as f64);
    let eps = 1e-12 * nf;
    Ok(if mf <= nf * (phi - delta) + eps {
        Signal::Escalate
    } else if mf >= nf * (phi + delta) - eps {
        Signal::Deescalate
    } else {
        Signal::Stay
    })
}

pub fn ccd_decide(n: u32, m: u32, phi: f64, delta: f64, current: usize, num_doses: usize) -> Result<Decision> {
    check_dose(current, num_doses)?;
    Ok(resolve_signal(ccd_signal(n, m, phi, delta)?, current, num_doses, None))
}

/// Unit probability masses of `(0, phi1)`, `(phi1, phi2)` and `(phi2, 1)`
/// under the beta posterior, in that order.
pub fn mtpi_upm(n: u32, m: u32, phi1: f64, phi2: f64, prior: (f64, f64)) -> Result<[f64; 3]> {
    check_counts(n, m)?;
    if !(0.0 < phi1 && phi1 < phi2 && phi2 < 1.0) {
        return Err(Error::parameter("phi1", "need 0 < phi1 < phi2 < 1"));
    }
    let (a, b) = (prior.0 + m as f64, prior.1 + (n - m) as f64);
    let f1 = beta_inc(phi1, a, b)?;
    let f2 = beta_inc(phi2, a, b)?;
    Ok([f1 / phi1, (f2 - f1) / (phi2 - phi1), (1.0 - f2) / (1.0 - phi2)])
}

/// Relative tolerance under which two unit probability masses count as tied.
pub const UPM_TIE: f64 = 1e-12;

/// mTPI signal: the interval with the largest unit probability mass.
/// Exact ties favour staying, then deescalating.
pub fn mtpi_signal(n: u32, m: u32, phi1: f64, phi2: f64, prior: (f64, f64)) -> Result<Signal> {
    let [low, mid, high] = mtpi_upm(n, m, phi1, phi2, prior)?;
    // Exact ties (n = 2, m = 1 at the default interval) must not hinge on rounding.
    let at_least = |a: f64, b: f64| a >= b - UPM_TIE * b.abs();
    Ok(if at_least(mid, low) && at_least(mid, high) {
        Signal::Stay
    } else if at_least(high, low) {
        Signal::Deescalate
    } else {
        Signal::Escalate
    })
}

pub fn mtpi_decide(n: u32, m: u32, phi1: f64, phi2: f64, current: usize, num_doses: usize) -> Result<Decision> {
    check_dose(current, num_doses)?;
    let s = mtpi_signal(n, m, phi1, phi2, (1.0, 1.0))?;
    Ok(resolve_signal(s, current, num_doses, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gud_examples() {
        assert_eq!(gud_decide(0, 3, 1, 6).unwrap(), Decision::Escalate);
        assert_eq!(gud_decide(1, 3, 1, 6).unwrap(), Decision::Deescalate);
        assert_eq!(gud_decide(2, 3, 0, 6).unwrap(), Decision::Stay);
        assert_eq!(gud_decide(0, 3, 5, 6).unwrap(), Decision::Stay);
        assert!(gud_decide(4, 3, 1, 6).is_err());
    }

    #[test]
    fn ccd_examples() {
        assert_eq!(ccd_decide(6, 0, 0.25, 0.09, 2, 6).unwrap(), Decision::Escalate);
        assert_eq!(ccd_decide(6, 1, 0.25, 0.09, 2, 6).unwrap(), Decision::Stay);
        assert_eq!(ccd_decide(3, 2, 0.25, 0.09, 2, 6).unwrap(), Decision::Deescalate);
        // boundary points are closed: 4/25 = 0.16 and 17/50 = 0.34
        assert_eq!(ccd_signal(25, 4, 0.25, 0.09).unwrap(), Signal::Escalate);
        assert_eq!(ccd_signal(50, 17, 0.25, 0.09).unwrap(), Signal::Deescalate);
        assert!(ccd_signal(0, 0, 0.25, 0.09).is_err());
    }

    #[test]
    fn mtpi_examples() {
        assert_eq!(mtpi_decide(3, 0, 0.15, 0.35, 1, 6).unwrap(), Decision::Escalate);
        assert_eq!(mtpi_decide(3, 3, 0.15, 0.35, 1, 6).unwrap(), Decision::Deescalate);
        assert_eq!(mtpi_signal(400, 100, 0.15, 0.35, (1.0, 1.0)).unwrap(), Signal::Stay);
    }

    #[test]
    fn upm_masses_sum_to_one() {
        for n in 1..30 {
            for m in 0..=n {
                let [a, b, c] = mtpi_upm(n, m, 0.15, 0.35, (1.0, 1.0)).unwrap();
                let total = a * 0.15 + b * 0.2 + c * 0.65;
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
