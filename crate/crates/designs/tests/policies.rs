use boin_core::{Decision, DesignSpec, DoseCounts, Signal, TrialState};
use boin_designs::rules::{mtpi_signal, mtpi_upm};
use boin_designs::{build_design, recommend, DESIGN_NAMES};
use proptest::prelude::*;
use serde_json::json;
use statrs::distribution::{Beta, ContinuousCDF};

#[test]
fn mtpi_masses_match_beta_posterior() {
    for n in 1..=18u32 {
        for m in 0..=n {
            let post = Beta::new(1.0 + m as f64, 1.0 + (n - m) as f64).unwrap();
            let want = [
                post.cdf(0.15) / 0.15,
                (post.cdf(0.35) - post.cdf(0.15)) / 0.2,
                (1.0 - post.cdf(0.35)) / 0.65,
            ];
            let got = mtpi_upm(n, m, 0.15, 0.35, (1.0, 1.0)).unwrap();
            for k in 0..3 {
                assert!((got[k] - want[k]).abs() < 1e-10, "n={n} m={m} k={k}");
            }
            // ties within the oracle's own accuracy go to stay, then de-escalate
            let top = want.iter().cloned().fold(f64::MIN, f64::max);
            let expected = [1, 2, 0]
                .into_iter()
                .find(|&k| want[k] > top - 1e-9)
                .map(|k| [Signal::Escalate, Signal::Stay, Signal::Deescalate][k])
                .unwrap();
            assert_eq!(mtpi_signal(n, m, 0.15, 0.35, (1.0, 1.0)).unwrap(), expected);
        }
    }
}

#[test]
fn registry_builds_every_design() {
    for name in DESIGN_NAMES {
        let d = build_design(name, DesignSpec::with_target(0.25), None).unwrap();
        assert_eq!(d.name(), name);
    }
}

#[test]
fn unknown_design_lists_registry() {
    let err = build_design("nosuch", DesignSpec::with_target(0.25), None).unwrap_err();
    let msg = err.to_string();
    for name in DESIGN_NAMES {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn configs_are_parsed_and_checked() {
    let spec = DesignSpec::with_target(0.25);
    assert!(build_design("ccd", spec.clone(), Some(&json!({"delta": 0.05}))).is_ok());
    assert!(build_design("ccd", spec.clone(), Some(&json!({"delta": 0.5}))).is_err());
    assert!(build_design("ccd", spec.clone(), Some(&json!({"width": 0.05}))).is_err());
    assert!(build_design("mtpi", spec.clone(), Some(&json!({"prior": [0.5, 0.5]}))).is_ok());
    assert!(build_design("crm", spec.clone(), Some(&json!({"prior_sd": 2.0}))).is_ok());
    assert!(build_design("crm", spec.clone(), Some(&json!({"skeleton": [0.1, 0.2]}))).is_err());
    assert!(build_design("local-optimal", spec.clone(), Some(&json!({}))).is_ok());
    assert!(build_design("local-optimal", spec, Some(&json!({"x": 1}))).is_err());
}

fn state_with_history(spec: &DesignSpec, cohorts: &[(usize, u32)]) -> TrialState {
    let mut s = TrialState::new(spec.num_doses);
    for &(dose, tox) in cohorts {
        s.record_cohort(dose, spec.cohort_size, tox).unwrap();
        s.current = dose;
    }
    s
}

#[test]
fn gud_ignores_earlier_cohorts() {
    let spec = DesignSpec::with_target(0.25).without_elimination();
    let gud = build_design("gud", spec.clone(), None).unwrap();
    let a = state_with_history(&spec, &[(0, 0), (1, 0), (2, 1), (2, 0)]);
    let b = state_with_history(&spec, &[(0, 1), (1, 2), (2, 0), (2, 0)]);
    assert_eq!(gud.decide(&a).unwrap(), Decision::Escalate);
    assert_eq!(gud.decide(&b).unwrap(), Decision::Escalate);
    let no_history = TrialState::from_counts(vec![DoseCounts::new(3, 0); 6], 0).unwrap();
    assert!(gud.decide(&no_history).is_err());
}

fn arb_state(num_doses: usize) -> impl Strategy<Value = (Vec<(u32, u32)>, usize, Option<usize>, u32)> {
    (
        prop::collection::vec((0u32..=2, 0u32..=3), num_doses),
        0..num_doses,
        prop::option::of(1..num_doses),
        0u32..=3,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn decisions_stay_in_range((data, current, closed, last_tox) in arb_state(6), which in 0usize..6) {
        let spec = DesignSpec::with_target(0.25);
        let design = build_design(DESIGN_NAMES[which], spec.clone(), None).unwrap();
        let counts: Vec<DoseCounts> = data.iter().map(|&(k, m)| DoseCounts::new(3 * k, m.min(3 * k))).collect();
        let mut state = TrialState::from_counts(counts, current).unwrap();
        state.counts[current].n += 3;
        state.counts[current].m += last_tox;
        state.history.push(boin_core::CohortRecord { dose: current, size: 3, toxicities: last_tox });
        prop_assume!(state.total_patients() < spec.max_sample);
        if let Some(e) = closed.filter(|&e| e > current) {
            state.eliminated_from = Some(e);
        }
        let d = design.decide(&state).unwrap();
        if let Some(next) = d.next_dose(current) {
            prop_assert!(next < 6);
            if design.name() != "crm" {
                prop_assert!(!state.is_eliminated(next), "{:?} -> {:?}", state.eliminated_from, d);
            }
        }
        let sel = design.select(&state).unwrap();
        if let Some(j) = sel {
            prop_assert!(j < 6);
            if design.name() != "crm" {
                prop_assert!(!state.is_eliminated(j));
            }
        }
    }
}

#[test]
fn tabulated_cutoffs_reproduce_the_decisions() {
    let spec = DesignSpec::with_target(0.25).without_elimination();
    for name in ["ccd", "mtpi", "local-optimal", "global-optimal"] {
        let design = build_design(name, spec.clone(), None).unwrap();
        for n in 1..=spec.max_sample - 3 {
            let c = design.cutoffs(1, n).unwrap();
            for m in 0..=n {
                let mut counts = vec![DoseCounts::default(); 6];
                counts[1] = DoseCounts::new(n, m);
                let state = TrialState::from_counts(counts, 1).unwrap();
                let want = if c.escalate_max.is_some_and(|b| m <= b) {
                    Decision::Escalate
                } else if c.deescalate_min.is_some_and(|b| m >= b) {
                    Decision::Deescalate
                } else {
                    Decision::Stay
                };
                assert_eq!(design.decide(&state).unwrap(), want, "{name} n={n} m={m}");
            }
        }
    }
}

#[test]
fn recommend_describes_elimination() {
    let spec = DesignSpec::with_target(0.25);
    let design = build_design("local-optimal", spec, None).unwrap();
    let state = TrialState::from_counts(
        vec![
            DoseCounts::new(3, 0),
            DoseCounts::new(3, 3),
            DoseCounts::default(),
            DoseCounts::default(),
            DoseCounts::default(),
            DoseCounts::default(),
        ],
        1,
    )
    .unwrap();
    let r = recommend(design.as_ref(), &state).unwrap();
    assert_eq!(r.decision, Decision::EliminateAndDeescalate);
    assert_eq!((r.dose, r.next_dose, r.eliminated_from), (2, Some(1), Some(2)));
    assert_eq!(
        (r.escalate_if_m_le, r.deescalate_if_m_ge, r.eliminate_if_m_ge),
        (Some(0), Some(1), Some(3))
    );
    assert!(r.eliminated && !r.terminated);

    let crm = build_design("crm", DesignSpec::with_target(0.25), None).unwrap();
    let r = recommend(
        crm.as_ref(),
        &TrialState::from_counts(
            vec![
                DoseCounts::new(3, 0),
                DoseCounts::default(),
                DoseCounts::default(),
                DoseCounts::default(),
                DoseCounts::default(),
                DoseCounts::default(),
            ],
            0,
        )
        .unwrap(),
    )
    .unwrap();
    assert_eq!((r.escalate_if_m_le, r.eliminate_if_m_ge), (None, None));
}
