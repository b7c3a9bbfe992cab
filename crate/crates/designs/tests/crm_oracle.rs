use boin_core::DoseCounts;
use boin_designs::crm::{crm_overdose_probabilities, crm_posterior, DEFAULT_SKELETON};
use proptest::prelude::*;

/// Midpoint Riemann sum over alpha on a wide grid with a million nodes.
fn riemann_oracle(skeleton: &[f64], sd: f64, counts: &[DoseCounts], phi: f64) -> (Vec<f64>, Vec<f64>) {
    const NODES: usize = 1_000_000;
    let (lo, hi) = (-10.0 * sd, 10.0 * sd);
    let h = (hi - lo) / NODES as f64;
    let log_w = |alpha: f64| {
        let mut ll = -0.5 * (alpha / sd).powi(2);
        for (c, &a) in counts.iter().zip(skeleton) {
            let log_p = alpha.exp() * a.ln();
            if c.m > 0 {
                ll += c.m as f64 * log_p;
            }
            if c.n > c.m {
                ll += (c.n - c.m) as f64 * (-log_p.exp_m1()).ln();
            }
        }
        ll
    };
    let peak = (0..=2000)
        .map(|i| log_w(lo + i as f64 * (hi - lo) / 2000.0))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let j = skeleton.len();
    let mut z = 0.0;
    let mut num = vec![0.0; j];
    let mut over = vec![0.0; j];
    for i in 0..NODES {
        let alpha = lo + (i as f64 + 0.5) * h;
        let lw = log_w(alpha);
        if !lw.is_finite() {
            continue;
        }
        let w = (lw - peak).exp();
        z += w;
        for k in 0..j {
            let p = skeleton[k].powf(alpha.exp());
            num[k] += w * p;
            if p > phi {
                over[k] += w;
            }
        }
    }
    (
        num.iter().map(|v| v / z).collect(),
        over.iter().map(|v| v / z).collect(),
    )
}

fn counts(v: &[(u32, u32)]) -> Vec<DoseCounts> {
    v.iter().map(|&(n, m)| DoseCounts::new(n, m)).collect()
}

#[test]
fn posterior_mean_matches_fine_grid() {
    for data in [
        vec![(3, 0), (0, 0), (0, 0), (0, 0), (0, 0), (0, 0)],
        vec![(3, 0), (3, 1), (6, 2), (0, 0), (0, 0), (0, 0)],
        vec![(3, 3), (0, 0), (0, 0), (0, 0), (0, 0), (0, 0)],
        vec![(3, 0), (3, 0), (3, 0), (9, 1), (12, 4), (6, 4)],
        vec![(0, 0); 6],
        vec![(0, 0), (0, 0), (36, 9), (0, 0), (0, 0), (0, 0)],
        vec![(3, 0), (3, 0), (3, 0), (3, 0), (3, 0), (24, 0)],
        vec![(30, 30), (0, 0), (0, 0), (0, 0), (0, 0), (0, 0)],
    ] {
        let c = counts(&data);
        let ours = crm_posterior(&DEFAULT_SKELETON, 1.24, &c).unwrap();
        let (oracle, _) = riemann_oracle(&DEFAULT_SKELETON, 1.24, &c, 0.25);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b.max(1e-6), "{data:?}: {ours:?} vs {oracle:?}");
        }
    }
}

#[test]
fn overdose_mass_matches_fine_grid() {
    for data in [
        vec![(3, 2), (0, 0), (0, 0), (0, 0), (0, 0), (0, 0)],
        vec![(3, 0), (3, 1), (6, 3), (0, 0), (0, 0), (0, 0)],
        vec![(3, 0), (6, 1), (18, 5), (9, 4), (0, 0), (0, 0)],
    ] {
        let c = counts(&data);
        let ours = crm_overdose_probabilities(&DEFAULT_SKELETON, 1.24, &c, 0.25).unwrap();
        let (_, oracle) = riemann_oracle(&DEFAULT_SKELETON, 1.24, &c, 0.25);
        for (a, b) in ours.iter().zip(&oracle) {
            // the indicator makes the Riemann oracle accurate to about one cell
            assert!((a - b).abs() < 1e-5, "{data:?}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimates_increase_with_dose(data in prop::collection::vec((0u32..=12, 0u32..=12), 6)) {
        let c: Vec<DoseCounts> = data.iter().map(|&(n, m)| DoseCounts::new(n, m.min(n))).collect();
        let est = crm_posterior(&DEFAULT_SKELETON, 1.24, &c).unwrap();
        prop_assert!(est.windows(2).all(|w| w[0] < w[1]), "{:?}", est);
        let od = crm_overdose_probabilities(&DEFAULT_SKELETON, 1.24, &c, 0.25).unwrap();
        prop_assert!(od.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{:?}", od);
    }
}
