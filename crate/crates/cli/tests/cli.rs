use std::path::Path;
use std::process::{Command, Output};

use boin_cli::run_args;
use boin_core::{BoundaryFamily, BoundaryTable, Decision, DesignSpec, DoseCounts, IntervalDesign, TrialState};
use boin_designs::DecisionRecord;
use boin_sim::{read_scenarios, CampaignMetadata};
use proptest::prelude::*;

fn boin(args: &[&str]) -> Output {
    boin_env(args, None)
}

fn boin_env(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_boin"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("BOIN_WORKERS", w),
        None => cmd.env_remove("BOIN_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn in_process(args: &[&str]) -> String {
    let mut out = Vec::new();
    run_args(args.iter().copied(), None, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn local_boundaries_print_the_interval() {
    let text = stdout(&boin(&["boundaries", "--design", "local", "--phi", "0.25"]));
    let table = BoundaryTable::from_csv(&text).unwrap();
    let (l1, l2) = table.lambda.unwrap();
    assert_eq!(format!("{l1:.3} {l2:.3}"), "0.197 0.298");
    assert_eq!(table.rows.len(), 36);
}

#[test]
fn global_boundaries_print_the_published_rows() {
    let text = stdout(&boin(&[
        "boundaries",
        "--design",
        "global",
        "--phi",
        "0.25",
        "--n-max",
        "15",
    ]));
    let table = BoundaryTable::from_csv(&text).unwrap();
    let esc: Vec<u32> = table.rows.iter().map(|r| r.escalate_if_m_le.unwrap()).collect();
    let de: Vec<u32> = table.rows.iter().map(|r| r.deescalate_if_m_ge.unwrap()).collect();
    let el: Vec<Option<u32>> = table.rows.iter().map(|r| r.eliminate_if_m_ge).collect();
    assert_eq!(esc, [0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 2]);
    assert_eq!(de, [1, 2, 2, 2, 3, 3, 4, 4, 5, 5, 5, 6, 6, 7, 7]);
    let mut want = vec![None, None];
    want.extend([3, 3, 3, 4, 4, 4, 5, 5, 6, 6, 6, 7, 7].map(Some));
    assert_eq!(el, want);
}

#[test]
fn emitted_tables_round_trip() {
    for design in ["local", "global"] {
        for phi in ["0.2", "0.3"] {
            let text = in_process(&["boundaries", "--design", design, "--phi", phi, "--n-max", "40"]);
            let spec = DesignSpec::with_target(phi.parse().unwrap());
            let family = if design == "local" {
                BoundaryFamily::Local
            } else {
                BoundaryFamily::Global
            };
            let built = BoundaryTable::build(&spec, family, 0, 40).unwrap();
            assert_eq!(BoundaryTable::from_csv(&text).unwrap().rows, built.rows);
        }
    }
}

#[test]
fn bad_hypothesis_order_is_a_validation_error() {
    let o = boin(&["boundaries", "--phi", "0.25", "--phi1", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("phi1 < phi"));
}

#[test]
fn next_dose_escalates_below_lambda1() {
    let text = stdout(&boin(&[
        "next-dose",
        "--design",
        "local",
        "--phi",
        "0.25",
        "--counts",
        "3/0,6/1",
        "--current",
        "2",
        "--format",
        "json",
    ]));
    let r: DecisionRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(r.decision, Decision::Escalate);
    assert_eq!((r.dose, r.n, r.m, r.next_dose), (2, 6, 1, Some(3)));
    assert_eq!(r.escalate_if_m_le, Some(1));
}

#[test]
fn next_dose_reports_elimination() {
    let text = in_process(&[
        "next-dose",
        "--phi",
        "0.25",
        "--counts",
        "3/3",
        "--current",
        "1",
        "--format",
        "json",
    ]);
    let r: DecisionRecord = serde_json::from_str(&text).unwrap();
    assert!(r.eliminated && r.terminated);
    assert_eq!(r.next_dose, None);

    let text = in_process(&[
        "next-dose",
        "--phi",
        "0.25",
        "--counts",
        "3/0,3/3",
        "--current",
        "2",
        "--format",
        "json",
    ]);
    let r: DecisionRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(r.decision, Decision::EliminateAndDeescalate);
    assert_eq!((r.next_dose, r.eliminated_from), (Some(1), Some(2)));
}

#[test]
fn malformed_counts_fail() {
    for counts in ["3/4", "3,0", "x/1"] {
        let o = boin(&["next-dose", "--phi", "0.25", "--counts", counts, "--current", "1"]);
        assert_eq!(o.status.code(), Some(2), "{counts}");
    }
}

#[test]
fn group_up_down_needs_the_last_cohort() {
    let args = [
        "next-dose",
        "--design",
        "gud",
        "--phi",
        "0.25",
        "--counts",
        "6/1",
        "--current",
        "1",
    ];
    let o = boin(&args);
    assert_eq!(o.status.code(), Some(2));
    let mut with = args.to_vec();
    with.extend(["--last-cohort", "3/0", "--format", "json"]);
    let r: DecisionRecord = serde_json::from_str(&in_process(&with)).unwrap();
    assert_eq!(r.decision, Decision::Escalate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn next_dose_matches_the_library(n in 1u32..=30, frac in 0.0f64..=1.0, global in any::<bool>()) {
        let m = (frac * n as f64).round() as u32;
        let counts = format!("3/0,{n}/{m}");
        let design = if global { "global" } else { "local" };
        let text = in_process(&["next-dose", "--design", design, "--phi", "0.25", "--counts", &counts,
                                "--current", "2", "--format", "json"]);
        let r: DecisionRecord = serde_json::from_str(&text).unwrap();
        let family = if global { BoundaryFamily::Global } else { BoundaryFamily::Local };
        let lib = IntervalDesign::new(DesignSpec::with_target(0.25), family).unwrap();
        let mut counts = vec![DoseCounts::default(); 6];
        counts[0] = DoseCounts::new(3, 0);
        counts[1] = DoseCounts::new(n, m);
        let state = TrialState::from_counts(counts, 1).unwrap();
        prop_assert_eq!(r.decision, lib.decide(&state).unwrap());
    }
}

#[test]
fn select_mtd_reports_one_based_doses() {
    let text = in_process(&[
        "select-mtd",
        "--phi",
        "0.25",
        "--counts",
        "3/0,6/1,9/2,6/3",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["selected"], 3);
    assert_eq!(v["doses"][4]["candidate"], false);
    let none = in_process(&[
        "select-mtd",
        "--phi",
        "0.25",
        "--counts",
        "3/3",
        "--eliminated-from",
        "1",
    ]);
    assert!(none.contains("MTD: none"));
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn simulate_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (k, workers) in ["1", "3"].iter().enumerate() {
        let csv = dir.path().join(format!("run{k}.csv"));
        let o = boin_env(
            &[
                "simulate",
                "--scenarios",
                "table4",
                "--designs",
                "local-optimal,gud,crm",
                "--reps",
                "300",
                "--seed",
                "7",
                "--out",
                csv.to_str().unwrap(),
            ],
            Some(workers),
        );
        stdout(&o);
        outputs.push((read(&csv), read(&csv.with_extension("meta.json"))));
    }
    assert_eq!(outputs[0], outputs[1]);
    let meta: CampaignMetadata = serde_json::from_slice(&outputs[0].1).unwrap();
    assert_eq!((meta.seed, meta.replicates), (7, 300));
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 * 3);
}

#[test]
fn simulate_single_replicate() {
    let text = in_process(&[
        "simulate",
        "--designs",
        "ccd",
        "--reps",
        "1",
        "--seed",
        "2",
        "--format",
        "json",
    ]);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    for r in rows {
        let v = r["mtd_selection_pct"]["mean"].as_f64().unwrap();
        assert!(v == 0.0 || v == 100.0);
    }
}

#[test]
fn simulate_rejects_unknown_designs_and_missing_seed() {
    let o = boin(&["simulate", "--designs", "nosuch", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("local-optimal") && err.contains("crm"), "{err}");
    assert_eq!(boin(&["simulate", "--designs", "gud"]).status.code(), Some(2));
    assert_eq!(boin(&["scenarios", "--phi", "0.25"]).status.code(), Some(2));
}

#[test]
fn generated_scenarios_feed_a_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("scen.json");
    stdout(&boin(&[
        "scenarios",
        "--seed",
        "5",
        "--count",
        "4",
        "--phi",
        "0.25",
        "--format",
        "json",
        "--out",
        file.to_str().unwrap(),
    ]));
    let list = read_scenarios(std::fs::File::open(&file).unwrap(), 0.25).unwrap();
    assert_eq!(list.len(), 4);
    let text = in_process(&[
        "simulate",
        "--scenarios",
        file.to_str().unwrap(),
        "--designs",
        "mtpi",
        "--reps",
        "50",
        "--seed",
        "1",
    ]);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn config_file_campaign_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("campaign.json");
    std::fs::write(
        &cfg,
        r#"{"designs": ["local-optimal", "ccd"], "replicates": 100, "seed": 4, "scenario_source": "table4"}"#,
    )
    .unwrap();
    let from_file = in_process(&["simulate", "--config", cfg.to_str().unwrap()]);
    let from_flags = in_process(&["simulate", "--designs", "local,ccd", "--reps", "100", "--seed", "4"]);
    assert_eq!(from_file, from_flags);
    let reseeded = in_process(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert_ne!(reseeded, from_file);
}

#[test]
fn calibration_exit_codes() {
    assert_eq!(
        boin(&[
            "calibrate",
            "--seed",
            "1",
            "--target-gap",
            "0.9",
            "--phi",
            "0.25",
            "--samples",
            "500"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        boin(&[
            "calibrate",
            "--seed",
            "1",
            "--target-gap",
            "0.01",
            "--phi",
            "0.25",
            "--samples",
            "500"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn repeated_next_dose_is_byte_identical() {
    let args = [
        "next-dose",
        "--design",
        "crm",
        "--phi",
        "0.25",
        "--counts",
        "3/0,3/1",
        "--current",
        "2",
    ];
    assert_eq!(stdout(&boin(&args)), stdout(&boin(&args)));
}
