//! Protocol tables of escalation, deescalation and elimination cutoffs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::boundaries::{global_cutoff_table, local_boundaries, BoundaryFamily, Cutoffs};
use crate::design::DesignSpec;
use crate::elimination::elimination_table;
use crate::error::{Error, Result};

pub const COLUMNS: [&str; 4] = ["n", "escalate_if_m_le", "deescalate_if_m_ge", "eliminate_if_m_ge"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub n: u32,
    pub escalate_if_m_le: Option<u32>,
    pub deescalate_if_m_ge: Option<u32>,
    pub eliminate_if_m_ge: Option<u32>,
}

impl BoundaryRow {
    pub fn cutoffs(&self) -> Cutoffs {
        Cutoffs {
            escalate_max: self.escalate_if_m_le,
            deescalate_min: self.deescalate_if_m_ge,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTable {
    pub family: BoundaryFamily,
    /// `(lambda1, lambda2)` when the boundaries do not depend on `n`.
    pub lambda: Option<(f64, f64)>,
    pub rows: Vec<BoundaryRow>,
}

impl BoundaryTable {
    /// Cutoffs for `dose` and each `n` in `1..=n_max`.
    pub fn build(spec: &DesignSpec, family: BoundaryFamily, dose: usize, n_max: u32) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::parameter("n_max", "must be at least 1"));
        }
        spec.validate_rates()?;
        let elim = elimination_table(spec, n_max)?;
        let (cutoffs, lambda) = match family {
            BoundaryFamily::Local => {
                let b = local_boundaries(spec, dose, 1)?;
                let cut = (1..=n_max)
                    .map(|n| Ok(local_boundaries(spec, dose, n)?.cutoffs_at(n)))
                    .collect::<Result<Vec<_>>>()?;
                (cut, b.n.is_none().then_some((b.lambda1, b.lambda2)))
            }
            BoundaryFamily::Global => (global_cutoff_table(spec, dose, n_max)?, None),
        };
        let rows = cutoffs
            .iter()
            .zip(elim)
            .zip(1..)
            .map(|((c, e), n)| BoundaryRow {
                n,
                escalate_if_m_le: c.escalate_max,
                deescalate_if_m_ge: c.deescalate_min,
                eliminate_if_m_ge: e,
            })
            .collect();
        Ok(BoundaryTable { family, lambda, rows })
    }

    fn preamble(&self) -> Vec<String> {
        let mut lines = vec![format!("design={}", self.family.as_str())];
        if let Some((l1, l2)) = self.lambda {
            lines.push(format!("lambda1={l1:.6}"));
            lines.push(format!("lambda2={l2:.6}"));
        }
        lines
    }

    /// CSV with a `#` comment preamble; empty regions are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.preamble() {
            let _ = writeln!(out, "# {line}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                na(r.escalate_if_m_le),
                na(r.deescalate_if_m_ge),
                na(r.eliminate_if_m_ge),
            ])
            .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii"));
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if let Some((l1, l2)) = self.lambda {
            let _ = writeln!(out, "lambda1 = {l1:.3}, lambda2 = {l2:.3}\n");
        }
        let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
        let _ = writeln!(out, "|{}", "---:|".repeat(COLUMNS.len()));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                r.n,
                na(r.escalate_if_m_le),
                na(r.deescalate_if_m_ge),
                na(r.eliminate_if_m_ge)
            );
        }
        out
    }

    /// Parses the output of [`BoundaryTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut family = None;
        let (mut l1, mut l2) = (None, None);
        let mut body = String::new();
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    match k {
                        "design" => family = Some(v.parse::<BoundaryFamily>()?),
                        "lambda1" => l1 = Some(parse_f64(v)?),
                        "lambda2" => l2 = Some(parse_f64(v)?),
                        _ => {}
                    }
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let header = reader.headers().map_err(csv_err)?.clone();
        if header.iter().ne(COLUMNS) {
            return Err(Error::parameter("csv", format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let n = rec[0]
                .parse()
                .map_err(|_| Error::parameter("n", format!("bad value '{}'", &rec[0])))?;
            rows.push(BoundaryRow {
                n,
                escalate_if_m_le: parse_na(&rec[1])?,
                deescalate_if_m_ge: parse_na(&rec[2])?,
                eliminate_if_m_ge: parse_na(&rec[3])?,
            });
        }
        Ok(BoundaryTable {
            family: family.ok_or_else(|| Error::parameter("csv", "missing design preamble"))?,
            lambda: l1.zip(l2),
            rows,
        })
    }
}

fn na(v: Option<u32>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn parse_na(s: &str) -> Result<Option<u32>> {
    if s == "NA" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::parameter("csv", format!("bad cutoff '{s}'")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parameter("csv", format!("bad number '{s}'")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::parameter("csv", e.to_string())
}
