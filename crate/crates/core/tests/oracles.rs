//! Cross-checks against independent evaluations built on `statrs`.

use boin_core::{
    eliminate_check, global_boundaries, global_error_rate, global_error_rate_quadrature, local_boundaries,
    local_error_rate, pava, special::beta_inc, CompositeMarginals, DesignSpec,
};
use statrs::distribution::{Beta, Binomial, ContinuousCDF, Discrete, DiscreteCDF};

const TARGETS: [f64; 6] = [0.15, 0.2, 0.25, 0.3, 0.35, 0.4];

fn cdf(b: i64, n: u32, p: f64) -> f64 {
    if b < 0 {
        0.0
    } else {
        Binomial::new(p, n as u64).unwrap().cdf(b as u64)
    }
}

/// Local error rate written out from the three hypotheses with statrs CDFs.
fn local_error_oracle(spec: &DesignSpec, n: u32, b1: i64, b2: i64) -> f64 {
    let third = 1.0 / 3.0;
    third * (cdf(b1, n, spec.phi) + 1.0 - cdf(b2 - 1, n, spec.phi))
        + third * (1.0 - cdf(b1, n, spec.phi1))
        + third * cdf(b2 - 1, n, spec.phi2)
}

#[test]
fn local_error_equals_hand_sum() {
    let spec = DesignSpec::with_target(0.25);
    let pmf = |k: u64, p: f64| Binomial::new(p, 6).unwrap().pmf(k);
    let retain_wrong = pmf(0, 0.25) + pmf(1, 0.25);
    let retain_wrong = retain_wrong + (2..=6).map(|k| pmf(k, 0.25)).sum::<f64>();
    let escalate_wrong: f64 = (2..=6).map(|k| pmf(k, 0.15)).sum();
    let deescalate_wrong: f64 = (0..=1).map(|k| pmf(k, 0.35)).sum();
    let want = (retain_wrong + escalate_wrong + deescalate_wrong) / 3.0;
    let got = local_error_rate(&spec, 0, 6, 1, 2).unwrap();
    assert!((got - want).abs() < 1e-14, "{got} vs {want}");
}

#[test]
fn local_partition_is_the_brute_force_argmin() {
    for &phi in &TARGETS {
        let spec = DesignSpec::with_target(phi);
        let b = local_boundaries(&spec, 0, 1).unwrap();
        for n in 1..=30u32 {
            let induced = b.cutoffs_at(n).extended(n);
            let mut best = (i64::MIN, i64::MIN, f64::INFINITY);
            for b1 in -1..=n as i64 {
                for b2 in (b1 + 1)..=(n as i64 + 1) {
                    let v = local_error_oracle(&spec, n, b1, b2);
                    if v < best.2 - 1e-13 {
                        best = (b1, b2, v);
                    }
                }
            }
            assert_eq!(induced, (best.0, best.1), "phi={phi} n={n}");
            let ours = local_error_rate(&spec, 0, n, induced.0, induced.1).unwrap();
            assert!((ours - best.2).abs() < 1e-13);
        }
    }
}

#[test]
fn global_search_agrees_with_posterior_crossing() {
    for &phi in &TARGETS {
        let spec = DesignSpec::with_target(phi).sample(300, 3);
        for n in 1..=300u32 {
            let m = CompositeMarginals::new(&spec, 0, n).unwrap();
            let (b1, b2, _) = m.minimize();
            assert_eq!((b1, b2), m.crossing(), "phi={phi} n={n}");
        }
    }
}

#[test]
fn closed_form_and_quadrature_agree() {
    let spec = DesignSpec::with_target(0.25);
    let a = global_error_rate(&spec, 0, 5, 0, 3).unwrap();
    let b = global_error_rate_quadrature(&spec, 0, 5, 0, 3).unwrap();
    assert!((a - b).abs() < 1e-10);
    for n in 1..=24u32 {
        for b1 in -1..=n as i64 {
            for b2 in (b1 + 1)..=(n as i64 + 1) {
                let a = global_error_rate(&spec, 0, n, b1, b2).unwrap();
                let b = global_error_rate_quadrature(&spec, 0, n, b1, b2).unwrap();
                assert!((a - b).abs() < 1e-10, "n={n} b=({b1},{b2}) {a} vs {b}");
            }
        }
    }
}

#[test]
fn global_boundaries_minimize_the_quadrature_error() {
    // The quadrature path shares no code with the beta-tail marginals.
    for &phi in &[0.2, 0.25, 0.3] {
        let spec = DesignSpec::with_target(phi);
        for n in 1..=20u32 {
            let mut best = (0i64, 0i64, f64::INFINITY);
            for b1 in -1..=n as i64 {
                for b2 in ((b1 + 1)..=(n as i64 + 1)).rev() {
                    let v = global_error_rate_quadrature(&spec, 0, n, b1, b2).unwrap();
                    if v < best.2 - 1e-11 {
                        best = (b1, b2, v);
                    }
                }
            }
            let c = global_boundaries(&spec, 0, n).unwrap().cutoffs.unwrap();
            assert_eq!(c.extended(n), (best.0, best.1), "phi={phi} n={n}");
        }
    }
}

#[test]
fn global_cutoffs_approach_hypothesis_rates() {
    let spec = DesignSpec::with_target(0.25).sample(3000, 3);
    let b = global_boundaries(&spec, 0, 3000).unwrap();
    assert!((b.lambda1 - 0.15).abs() < 0.01, "{}", b.lambda1);
    assert!((b.lambda2 - 0.35).abs() < 0.01, "{}", b.lambda2);
}

#[test]
fn elimination_matches_beta_posterior() {
    for &phi in &TARGETS {
        let spec = DesignSpec::with_target(phi);
        for n in 3..=40u32 {
            for m in 0..=n {
                let post = Beta::new(1.0 + m as f64, 1.0 + (n - m) as f64).unwrap();
                let want = 1.0 - post.cdf(phi) > 0.95;
                assert_eq!(eliminate_check(&spec, n, m).unwrap(), want, "phi={phi} n={n} m={m}");
            }
        }
    }
}

#[test]
fn elimination_worked_cases() {
    let spec = DesignSpec::with_target(0.25);
    let exceed = |n: u32, m: u32| 1.0 - Beta::new(1.0 + m as f64, 1.0 + (n - m) as f64).unwrap().cdf(0.25);
    assert!(exceed(9, 5) > 0.95 && exceed(9, 4) < 0.95);
    assert!(eliminate_check(&spec, 9, 5).unwrap());
    assert!(!eliminate_check(&spec, 9, 4).unwrap());
}

#[test]
fn incomplete_beta_matches_statrs() {
    for &(x, a, b) in &[
        (0.25, 0.1, 3.1),
        (0.25, 5.1, 4.1),
        (0.6, 30.0, 12.0),
        (0.02, 2.0, 200.0),
        (0.999, 0.5, 0.5),
    ] {
        let want = Beta::new(a, b).unwrap().cdf(x);
        let got = beta_inc(x, a, b).unwrap();
        assert!(
            (got - want).abs() < 1e-12 * want.max(1e-3),
            "{x} {a} {b}: {got} vs {want}"
        );
    }
}

#[test]
fn tail_ratio_increases_in_y() {
    for &phi in &TARGETS {
        let (phi1, phi2) = (0.6 * phi, 1.4 * phi);
        for n in 1..=30u32 {
            let ratio = |y: u32| {
                let (a, b) = ((y + 1) as f64, (n - y + 1) as f64);
                beta_inc(phi2, a, b).unwrap() / beta_inc(phi1, a, b).unwrap()
            };
            for y in 0..n {
                assert!(ratio(y + 1) > ratio(y), "phi={phi} n={n} y={y}");
            }
        }
    }
}

/// Best monotone step fit by enumerating every split into contiguous blocks.
fn exhaustive_isotonic(rates: &[f64], weights: &[f64]) -> Vec<f64> {
    let k = rates.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (k - 1)) {
        let mut fit = vec![0.0; k];
        let mut start = 0;
        let mut ok = true;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..k {
            if i == k - 1 || mask & (1 << i) != 0 {
                let w: f64 = weights[start..=i].iter().sum();
                let s: f64 = (start..=i).map(|j| weights[j] * rates[j]).sum();
                let v = s / w;
                if v < prev - 1e-15 {
                    ok = false;
                    break;
                }
                prev = v;
                fit[start..=i].iter_mut().for_each(|f| *f = v);
                start = i + 1;
            }
        }
        if !ok {
            continue;
        }
        let sse: f64 = (0..k).map(|j| weights[j] * (rates[j] - fit[j]).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-14) {
            best = Some((sse, fit));
        }
    }
    best.unwrap().1
}

#[test]
fn pava_matches_exhaustive_search_for_three_doses() {
    let grid: Vec<f64> = (0..=9).map(|i| i as f64 / 9.0).collect();
    for w0 in 1..=9 {
        for w1 in 1..=9 {
            for w2 in 1..=9 {
                let w = [w0 as f64, w1 as f64, w2 as f64];
                for &r0 in &grid {
                    for &r1 in &grid {
                        for &r2 in &grid {
                            let r = [r0, r1, r2];
                            let got = pava(&r, &w).unwrap();
                            let want = exhaustive_isotonic(&r, &w);
                            for j in 0..3 {
                                assert!((got[j].unwrap() - want[j]).abs() < 1e-12, "{r:?} {w:?}");
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn pava_worked_example() {
    let got = pava(&[0.0, 0.4, 0.2, 0.5], &[3.0, 6.0, 3.0, 3.0]).unwrap();
    let want = exhaustive_isotonic(&[0.0, 0.4, 0.2, 0.5], &[3.0, 6.0, 3.0, 3.0]);
    for j in 0..4 {
        assert!((got[j].unwrap() - want[j]).abs() < 1e-12);
    }
}
