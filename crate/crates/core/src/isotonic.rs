//! Isotonic toxicity estimates and end-of-trial MTD selection.

use serde::{Deserialize, Serialize};

use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::state::{DoseCounts, TrialState};

const DISTANCE_TIE: f64 = 1e-12;

/// Weighted pool-adjacent-violators fit.
///
/// Entries with zero weight take no part in the pooling and come back as
/// `None`; their rates are ignored.
pub fn pava(rates: &[f64], weights: &[f64]) -> Result<Vec<Option<f64>>> {
    if rates.len() != weights.len() {
        return Err(Error::parameter(
            "weights",
            format!("length {} does not match rates length {}", weights.len(), rates.len()),
        ));
    }
    for (j, (&r, &w)) in rates.iter().zip(weights).enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::parameter(format!("weights[{}]", j + 1), "must be non-negative"));
        }
        if w > 0.0 && !(0.0..=1.0).contains(&r) {
            return Err(Error::parameter(
                format!("rates[{}]", j + 1),
                format!("{r} outside [0, 1]"),
            ));
        }
    }

    // blocks of (weight, weighted sum, member indices count)
    let active: Vec<usize> = (0..rates.len()).filter(|&j| weights[j] > 0.0).collect();
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(active.len());
    for &j in &active {
        blocks.push((weights[j], weights[j] * rates[j], 1));
        while blocks.len() > 1 {
            let (w2, s2, c2) = blocks[blocks.len() - 1];
            let (w1, s1, c1) = blocks[blocks.len() - 2];
            if s1 / w1 <= s2 / w2 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks present") = (w1 + w2, s1 + s2, c1 + c2);
        }
    }

    let mut out = vec![None; rates.len()];
    let mut idx = active.iter();
    for (w, s, count) in blocks {
        for _ in 0..count {
            let j = *idx.next().expect("block sizes cover active doses");
            // unpooled doses keep their observed rate exactly
            out[j] = Some(if count == 1 { rates[j] } else { s / w });
        }
    }
    Ok(out)
}

/// Isotonic fit of observed rates weighted by patient counts.
pub fn isotonic_fit(counts: &[DoseCounts]) -> Vec<Option<f64>> {
    let rates: Vec<f64> = counts.iter().map(|c| c.rate().unwrap_or(0.0)).collect();
    let weights: Vec<f64> = counts.iter().map(|c| c.n as f64).collect();
    pava(&rates, &weights).expect("counts always yield valid rates and weights")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Tied estimates below the target: highest tied dose.
    HighestBelowTarget,
    /// Tied estimates above the target: lowest tied dose.
    LowestAboveTarget,
    /// Tied estimates equal to the target: lowest tied dose.
    LowestAtTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Zero-based selected dose, `None` when no MTD can be named.
    pub selected: Option<usize>,
    pub observed: Vec<Option<f64>>,
    pub isotonic: Vec<Option<f64>>,
    /// Doses eligible for selection: treated and not eliminated.
    pub candidates: Vec<usize>,
    /// `|p_tilde - phi|` for each candidate, in candidate order.
    pub distances: Vec<f64>,
    pub tie_rule: Option<TieRule>,
    pub note: String,
}

/// Selects the MTD from the state's counts.
pub fn select_mtd(state: &TrialState, spec: &DesignSpec) -> Result<SelectionReport> {
    spec.validate_rates()?;
    if state.counts.len() != spec.num_doses {
        return Err(Error::parameter(
            "counts",
            format!("expected {} doses, got {}", spec.num_doses, state.counts.len()),
        ));
    }
    Ok(select_from_counts(&state.counts, state.eliminated_from, spec.phi))
}

/// Selection core shared by the simulators. A trial whose lowest dose was
/// eliminated (`eliminated_from == Some(0)`) yields no MTD.
pub fn select_from_counts(counts: &[DoseCounts], eliminated_from: Option<usize>, phi: f64) -> SelectionReport {
    let observed: Vec<Option<f64>> = counts.iter().map(DoseCounts::rate).collect();
    let isotonic = isotonic_fit(counts);
    let top = eliminated_from.unwrap_or(counts.len());
    let candidates: Vec<usize> = (0..top).filter(|&j| counts[j].n > 0).collect();
    let distances: Vec<f64> = candidates
        .iter()
        .map(|&j| (isotonic[j].expect("treated dose has an estimate") - phi).abs())
        .collect();

    let mut report = SelectionReport {
        selected: None,
        observed,
        isotonic,
        candidates,
        distances,
        tie_rule: None,
        note: String::new(),
    };
    if report.candidates.is_empty() {
        report.note = if top == 0 {
            "lowest dose eliminated; no MTD".into()
        } else {
            "no treated dose is eligible; no MTD".into()
        };
        return report;
    }

    let best = report.distances.iter().copied().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = report
        .candidates
        .iter()
        .zip(&report.distances)
        .filter(|(_, &d)| d - best <= DISTANCE_TIE)
        .map(|(&j, _)| j)
        .collect();
    let est = |j: usize| report.isotonic[j].expect("treated dose has an estimate");

    let (chosen, rule) = if tied.len() == 1 {
        (tied[0], None)
    } else if let Some(&j) = tied.iter().rev().find(|&&j| est(j) < phi - DISTANCE_TIE) {
        (j, Some(TieRule::HighestBelowTarget))
    } else if tied.iter().all(|&j| est(j) > phi + DISTANCE_TIE) {
        (tied[0], Some(TieRule::LowestAboveTarget))
    } else {
        (tied[0], Some(TieRule::LowestAtTarget))
    };
    report.selected = Some(chosen);
    report.tie_rule = rule;
    report.note = match rule {
        None => format!("dose {} has the isotonic estimate closest to the target", chosen + 1),
        Some(r) => format!(
            "doses {:?} tie; {} applied",
            tied.iter().map(|j| j + 1).collect::<Vec<_>>(),
            match r {
                TieRule::HighestBelowTarget => "highest tied dose below the target",
                TieRule::LowestAboveTarget => "lowest tied dose above the target",
                TieRule::LowestAtTarget => "lowest tied dose at the target",
            }
        ),
    };
    report
}
