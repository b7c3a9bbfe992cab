//! Posterior-probability dose elimination.

use crate::design::{DesignSpec, EliminationRule};
use crate::error::{Error, Result};
use crate::special::beta_inc_upper;

/// `Pr(p > phi)` under the beta posterior obtained from `prior` after `m`
/// toxicities in `n` patients.
pub fn exceedance_probability(phi: f64, prior: (f64, f64), n: u32, m: u32) -> Result<f64> {
    if m > n {
        return Err(Error::parameter("m", format!("toxicities ({m}) exceed patients ({n})")));
    }
    beta_inc_upper(phi, prior.0 + m as f64, prior.1 + (n - m) as f64)
}

fn fires(rule: &EliminationRule, phi: f64, n: u32, m: u32) -> Result<bool> {
    if n < rule.min_n {
        return Ok(false);
    }
    Ok(exceedance_probability(phi, rule.prior, n, m)? > rule.threshold)
}

/// True when `m` toxicities out of `n` close the dose. Always false when the
/// spec carries no elimination rule.
pub fn eliminate_check(spec: &DesignSpec, n: u32, m: u32) -> Result<bool> {
    if m > n {
        return Err(Error::parameter("m", format!("toxicities ({m}) exceed patients ({n})")));
    }
    spec.validate_rates()?;
    match &spec.elimination {
        None => Ok(false),
        Some(rule) => fires(rule, spec.phi, n, m),
    }
}

/// Smallest eliminating toxicity count for each `n` in `1..=n_max`
/// (index `n - 1`), `None` where no count eliminates.
pub fn elimination_table(spec: &DesignSpec, n_max: u32) -> Result<Vec<Option<u32>>> {
    if n_max == 0 {
        return Err(Error::parameter("n_max", "must be at least 1"));
    }
    Ok(EliminationBoundaries::new(spec, n_max)?.min_m)
}

/// Precomputed elimination cutoffs, used by the simulators where the same
/// `(n, m)` pairs are queried millions of times.
#[derive(Clone, Debug, PartialEq)]
pub struct EliminationBoundaries {
    min_m: Vec<Option<u32>>,
}

impl EliminationBoundaries {
    pub fn new(spec: &DesignSpec, n_max: u32) -> Result<Self> {
        spec.validate_rates()?;
        let Some(rule) = spec.elimination else {
            return Ok(EliminationBoundaries {
                min_m: vec![None; n_max as usize],
            });
        };
        let mut min_m = Vec::with_capacity(n_max as usize);
        let mut lo = 0;
        for n in 1..=n_max {
            // The exceedance probability increases with m, and the minimal
            // eliminating m never decreases with n, so search upward from
            // the previous cutoff.
            if !fires(&rule, spec.phi, n, n)? {
                min_m.push(None);
                continue;
            }
            let (mut a, mut b) = (lo.min(n), n);
            while a < b {
                let mid = a + (b - a) / 2;
                if fires(&rule, spec.phi, n, mid)? {
                    b = mid;
                } else {
                    a = mid + 1;
                }
            }
            lo = a;
            min_m.push(Some(a));
        }
        Ok(EliminationBoundaries { min_m })
    }

    pub fn n_max(&self) -> u32 {
        self.min_m.len() as u32
    }

    /// Minimal eliminating count at `n`, if any.
    pub fn min_toxicities(&self, n: u32) -> Option<u32> {
        if n == 0 {
            return None;
        }
        self.min_m.get(n as usize - 1).copied().flatten()
    }

    pub fn eliminates(&self, n: u32, m: u32) -> bool {
        self.min_toxicities(n).is_some_and(|b| m >= b)
    }

    pub fn as_slice(&self) -> &[Option<u32>] {
        &self.min_m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let spec = DesignSpec::with_target(0.25);
        assert!(eliminate_check(&spec, 3, 3).unwrap());
        assert!(!eliminate_check(&spec, 2, 2).unwrap());
        assert!(eliminate_check(&spec, 9, 5).unwrap());
        assert!(!eliminate_check(&spec, 9, 4).unwrap());
        assert!(eliminate_check(&spec, 4, 3).unwrap());
        assert!(eliminate_check(&spec, 3, 4).is_err());
    }

    #[test]
    fn disabled_rule_never_fires() {
        let spec = DesignSpec::with_target(0.25).without_elimination();
        assert!(!eliminate_check(&spec, 30, 30).unwrap());
        assert_eq!(elimination_table(&spec, 5).unwrap(), vec![None; 5]);
    }

    #[test]
    fn table_matches_pointwise_checks() {
        let spec = DesignSpec::with_target(0.3);
        let table = EliminationBoundaries::new(&spec, 60).unwrap();
        for n in 1..=60 {
            for m in 0..=n {
                assert_eq!(
                    table.eliminates(n, m),
                    eliminate_check(&spec, n, m).unwrap(),
                    "n={n} m={m}"
                );
            }
        }
    }
}
