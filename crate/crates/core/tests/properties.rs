use boin_core::{
    decide, eliminate_check, elimination_table, local_boundaries, pava, select_from_counts, BoundaryFamily, Decision,
    DesignSpec, DoseCounts, IntervalDesign, Signal, TrialState,
};
use proptest::prelude::*;

fn targets() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.15, 0.2, 0.25, 0.3, 0.35, 0.4])
}

fn family() -> impl Strategy<Value = BoundaryFamily> {
    prop::sample::select(vec![BoundaryFamily::Local, BoundaryFamily::Global])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn decisions_are_coherent(phi in targets(), fam in family(), n in 1u32..=36, m_frac in 0.0f64..=1.0) {
        let m = ((n as f64) * m_frac).round() as u32;
        let design = IntervalDesign::new(DesignSpec::with_target(phi), fam).unwrap();
        let s = design.signal(2, n, m);
        let rate = m as f64 / n as f64;
        if rate > phi {
            prop_assert_ne!(s, Signal::Escalate);
        }
        if rate < phi {
            prop_assert_ne!(s, Signal::Deescalate);
        }
    }

    #[test]
    fn local_boundaries_sit_inside_hypotheses(phi in 0.05f64..0.6, lo in 0.3f64..0.9, hi in 1.1f64..1.6) {
        let spec = DesignSpec::with_target(phi).hypotheses(lo * phi, (hi * phi).min(0.99));
        prop_assume!(spec.validate_rates().is_ok());
        let b = local_boundaries(&spec, 0, 1).unwrap();
        prop_assert!(spec.phi1 < b.lambda1 && b.lambda1 < phi);
        prop_assert!(phi < b.lambda2 && b.lambda2 < spec.phi2);
    }

    #[test]
    fn elimination_is_monotone_in_m(phi in targets(), n in 1u32..60) {
        let spec = DesignSpec::with_target(phi);
        let mut seen = false;
        for m in 0..=n {
            let e = eliminate_check(&spec, n, m).unwrap();
            prop_assert!(!seen || e, "n={} m={}", n, m);
            seen |= e;
        }
    }

    #[test]
    fn elimination_cutoff_nondecreasing_in_n(phi in targets()) {
        let t = elimination_table(&DesignSpec::with_target(phi), 80).unwrap();
        let cut: Vec<u32> = t.into_iter().flatten().collect();
        prop_assert!(cut.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn pava_is_monotone_idempotent_and_mean_preserving(
        data in prop::collection::vec((0u32..=9, 0u32..=9), 1..=6)
    ) {
        let rates: Vec<f64> = data.iter().map(|&(m, n)| if n == 0 { 0.0 } else { m.min(n) as f64 / n as f64 }).collect();
        let weights: Vec<f64> = data.iter().map(|&(_, n)| n as f64).collect();
        let fit = pava(&rates, &weights).unwrap();
        let vals: Vec<f64> = fit.iter().flatten().copied().collect();
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1] + 1e-15));

        let again = pava(&fit.iter().map(|v| v.unwrap_or(0.0)).collect::<Vec<_>>(), &weights).unwrap();
        for (a, b) in fit.iter().zip(&again) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "support changed"),
            }
        }

        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            let before: f64 = rates.iter().zip(&weights).map(|(r, w)| r * w).sum();
            let after: f64 = fit.iter().zip(&weights).map(|(r, w)| r.unwrap_or(0.0) * w).sum();
            prop_assert!((before - after).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_avoids_closed_and_untreated_doses(
        data in prop::collection::vec((0u32..=9, 0u32..=9), 2..=6),
        cut in 0usize..7,
    ) {
        let counts: Vec<DoseCounts> = data.iter().map(|&(m, n)| DoseCounts::new(n, m.min(n))).collect();
        let eliminated = (cut < counts.len()).then_some(cut);
        let r = select_from_counts(&counts, eliminated, 0.25);
        if let Some(j) = r.selected {
            prop_assert!(eliminated.is_none_or(|e| j < e));
            prop_assert!(counts[j].n > 0);
        }
        prop_assert_eq!(r, select_from_counts(&counts, eliminated, 0.25));
    }

    #[test]
    fn decide_respects_dose_range(
        phi in targets(),
        data in prop::collection::vec((0u32..=6, 0u32..=6), 4),
        current in 0usize..4,
        closed in 1usize..5,
    ) {
        let spec = DesignSpec::with_target(phi).doses(4);
        let counts: Vec<DoseCounts> = data.iter().map(|&(m, n)| DoseCounts::new(n.max(1), m.min(n.max(1)))).collect();
        let mut state = TrialState::from_counts(counts, current).unwrap();
        if closed < 4 && current < closed {
            state.eliminated_from = Some(closed);
        }
        let b = local_boundaries(&spec, current, 1).unwrap();
        let d = decide(&spec, &state, &b).unwrap();
        if let Some(next) = d.next_dose(current) {
            prop_assert!(next < 4);
            prop_assert!(!state.is_eliminated(next) || d == Decision::EliminateAndDeescalate);
        }
    }
}
