use std::io::Write;

use boin_core::{Error, Result};

use crate::campaign::OperatingCharacteristics;

const SUMMARY_COLUMNS: [&str; 17] = [
    "design",
    "scenario",
    "replicates",
    "mtd_selection_pct",
    "mtd_selection_se",
    "pct_patients_at_mtd",
    "pct_patients_at_mtd_se",
    "patients_at_mtd",
    "patients_at_mtd_se",
    "avg_toxicity_rate",
    "avg_toxicity_rate_se",
    "risk_poor_allocation_pct",
    "risk_poor_allocation_se",
    "risk_high_toxicity_pct",
    "risk_high_toxicity_se",
    "avg_sample_size",
    "avg_sample_size_se",
];

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Header for `num_doses` doses: the summary columns, early termination and
/// no-selection rates, then per-dose selection and allocation.
pub fn csv_header(num_doses: usize) -> Vec<String> {
    let mut h: Vec<String> = SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.push("early_termination_pct".into());
    h.push("no_selection_pct".into());
    h.extend((1..=num_doses).map(|j| format!("select_pct_{j}")));
    h.extend((1..=num_doses).map(|j| format!("patients_{j}")));
    h
}

/// Writes one row per design and ensemble with fixed four-decimal numbers,
/// so identical results give identical bytes.
pub fn write_csv<W: Write>(rows: &[OperatingCharacteristics], out: W) -> Result<()> {
    let num_doses = rows.first().map_or(0, |r| r.selection_pct.len());
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::State(format!("cannot write CSV: {e}"));
    w.write_record(csv_header(num_doses)).map_err(io)?;
    for r in rows {
        if r.selection_pct.len() != num_doses {
            return Err(Error::parameter("rows", "all rows must have the same number of doses"));
        }
        let mut rec = vec![r.design.clone(), r.scenario.clone(), r.replicates.to_string()];
        for e in [
            r.mtd_selection_pct,
            r.pct_patients_at_mtd,
            r.patients_at_mtd,
            r.avg_toxicity_rate,
            r.risk_poor_allocation_pct,
            r.risk_high_toxicity_pct,
            r.avg_sample_size,
        ] {
            rec.push(fmt(e.mean));
            rec.push(fmt(e.se));
        }
        rec.push(fmt(r.early_termination_pct));
        rec.push(fmt(r.no_selection_pct));
        rec.extend(r.selection_pct.iter().map(|&v| fmt(v)));
        rec.extend(r.patients_per_dose.iter().map(|&v| fmt(v)));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::State(format!("cannot write CSV: {e}")))?;
    Ok(())
}
