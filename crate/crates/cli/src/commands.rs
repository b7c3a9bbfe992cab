use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use boin_core::{select_mtd, BoundaryTable, CohortRecord, Error, Result, TrialState};
use boin_designs::{build_design, recommend, DecisionRecord};
use boin_sim::config::RandomSourceConfig;
use boin_sim::{
    calibrate_mu, generate_scenario, run_campaign, write_csv, CampaignConfig, DesignEntry, OperatingCharacteristics,
    PoorAllocationRule, Scenario, ScenarioRecord, ScenarioSourceConfig,
};

use crate::args::{dose_index, pad_counts, parse_counts, require_format, Format, GeneratorArgs, SpecArgs};
use crate::{CliError, Command};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PoorRule {
    AtMost,
    Below,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON campaign config; replaces the campaign flags except --seed.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; required unless the config file sets one.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated design names.
    #[arg(long, value_delimiter = ',')]
    designs: Vec<String>,
    /// `table4`, `random`, or a JSON scenario file.
    #[arg(long, default_value = "table4")]
    scenarios: String,
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    /// Average gap for calibrated random scenarios.
    #[arg(long)]
    target_gap: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    calibration_samples: u64,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, value_enum, default_value = "at-most")]
    poor_allocation: PoorRule,
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Results file; the metadata sidecar goes next to it.
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Metadata sidecar path [default: <out>.meta.json].
    #[arg(long, value_name = "FILE")]
    metadata: Option<PathBuf>,
}

pub(crate) fn dispatch(command: Command, out: &mut dyn Write, workers: Option<&str>) -> Result<(), CliError> {
    match command {
        Command::Boundaries {
            design,
            spec,
            n_max,
            dose,
            format,
            out: path,
        } => {
            let spec = spec.build(None)?;
            let dose = dose_index(dose, spec.num_doses, "dose")?;
            let table = BoundaryTable::build(&spec, design.into(), dose, n_max.unwrap_or(spec.max_sample))?;
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Markdown | Format::Text => table.to_markdown(),
                Format::Json => json(&table),
            };
            emit(&text, path.as_deref(), out)
        }
        Command::NextDose {
            design,
            config,
            spec,
            counts,
            current,
            last_cohort,
            eliminated_from,
            format,
        } => {
            require_format(format, &[Format::Text, Format::Json], "next-dose")?;
            let spec = spec.build(None)?;
            let config = config.map(|c| parse_json(&c, "config")).transpose()?;
            let policy = build_design(canonical_design(&design), spec.clone(), config.as_ref())?;
            let counts = pad_counts(parse_counts(&counts)?, spec.num_doses)?;
            let current = dose_index(current, spec.num_doses, "current")?;
            let mut state = TrialState::from_counts(counts, current)?;
            if let Some(e) = eliminated_from {
                state.eliminated_from = Some(dose_index(e, spec.num_doses, "eliminated-from")?);
            }
            if let Some(text) = last_cohort {
                state.history.push(parse_last_cohort(&text, &state)?);
            }
            let record = recommend(policy.as_ref(), &state)?;
            let text = match format {
                Format::Json => json(&record),
                _ => decision_text(&record),
            };
            emit(&text, None, out)
        }
        Command::SelectMtd {
            spec,
            counts,
            eliminated_from,
            format,
        } => {
            let spec = spec.build(None)?;
            let counts = pad_counts(parse_counts(&counts)?, spec.num_doses)?;
            let mut state = TrialState::from_counts(counts, 0)?;
            if let Some(e) = eliminated_from {
                state.eliminated_from = Some(dose_index(e, spec.num_doses, "eliminated-from")?);
            }
            let view = SelectionView::new(&state, &select_mtd(&state, &spec)?);
            let text = match format {
                Format::Json => json(&view),
                Format::Csv => view.csv(),
                Format::Text | Format::Markdown => view.markdown(),
            };
            emit(&text, None, out)
        }
        Command::Scenarios {
            seed,
            count,
            doses,
            phi,
            generator,
            target_gap,
            calibration_samples,
            format,
            out: path,
        } => {
            require_format(format, &[Format::Csv, Format::Json], "scenarios")?;
            let seed = require_seed(seed)?;
            let mut config = generator.config()?;
            if let Some(gap) = target_gap {
                let c = calibrate_mu(&config, gap, phi, doses, calibration_samples, seed)?;
                eprintln!("calibrated mu = {:.6} (average gap {:.4})", c.mu, c.achieved_gap);
                config = config.with_mu(c.mu);
            }
            let list = (0..count)
                .map(|i| generate_scenario(&config, phi, doses, seed, i))
                .collect::<Result<Vec<_>>>()?;
            let text = match format {
                Format::Json => json(&list.iter().map(ScenarioRecord::from).collect::<Vec<_>>()),
                _ => scenarios_csv(&list, doses)?,
            };
            emit(&text, path.as_deref(), out)
        }
        Command::Calibrate {
            seed,
            target_gap,
            doses,
            phi,
            generator,
            samples,
            format,
        } => {
            require_format(format, &[Format::Text, Format::Json], "calibrate")?;
            let seed = require_seed(seed)?;
            let c = calibrate_mu(&generator.config()?, target_gap, phi, doses, samples, seed)?;
            let text = match format {
                Format::Json => json(&c),
                _ => format!(
                    "mu = {:.6}\naverage gap = {:.6} (target {}, {} scenarios, seed {})\n",
                    c.mu, c.achieved_gap, c.target_gap, c.samples, c.seed
                ),
            };
            emit(&text, None, out)
        }
        Command::Simulate(args) => simulate(args, out, workers),
    }
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::parameter("seed", "--seed is required; every random draw is reproducible from it"))
}

fn canonical_design(name: &str) -> &str {
    match name {
        "local" => "local-optimal",
        "global" => "global-optimal",
        other => other,
    }
}

fn parse_json(text: &str, field: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::parameter(field, format!("invalid JSON: {e}")))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(CliError::from),
    }
}

fn parse_last_cohort(text: &str, state: &TrialState) -> Result<CohortRecord> {
    let bad = || Error::parameter("last-cohort", format!("expected 'size/toxicities', got '{text}'"));
    let (size, tox) = text.split_once('/').ok_or_else(bad)?;
    let size: u32 = size.trim().parse().map_err(|_| bad())?;
    let toxicities: u32 = tox.trim().parse().map_err(|_| bad())?;
    let c = state.current_counts();
    if toxicities > size || size > c.n || toxicities > c.m {
        return Err(Error::parameter(
            "last-cohort",
            format!(
                "{toxicities}/{size} is not part of the {}/{} at the current dose",
                c.m, c.n
            ),
        ));
    }
    Ok(CohortRecord {
        dose: state.current,
        size,
        toxicities,
    })
}

fn cut(v: Option<u32>, op: &str) -> String {
    v.map_or_else(|| "never".to_string(), |k| format!("m {op} {k}"))
}

fn decision_text(r: &DecisionRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "design:     {}", r.design);
    let _ = writeln!(
        s,
        "dose:       {} (n = {}, m = {}, rate {:.3})",
        r.dose, r.n, r.m, r.observed_rate
    );
    if r.escalate_if_m_le.is_some() || r.deescalate_if_m_ge.is_some() {
        let _ = writeln!(
            s,
            "boundaries: escalate if {}; deescalate if {}",
            cut(r.escalate_if_m_le, "<="),
            cut(r.deescalate_if_m_ge, ">=")
        );
    }
    let elim = if r.eliminated { " (fired)" } else { "" };
    let _ = writeln!(s, "eliminate:  {}{elim}", cut(r.eliminate_if_m_ge, ">="));
    let _ = writeln!(s, "decision:   {}", r.decision.label());
    match r.next_dose {
        Some(d) => {
            let _ = writeln!(s, "next dose:  {d}");
        }
        None => {
            let reason = match r.decision {
                boin_core::Decision::TerminateTrial { reason } => format!("{reason:?}"),
                _ => String::new(),
            };
            let _ = writeln!(s, "next dose:  none, trial stops ({reason})");
        }
    }
    if let Some(e) = r.eliminated_from {
        let _ = writeln!(s, "closed:     doses {e} and above");
    }
    s
}

#[derive(Debug, Serialize)]
struct DoseRow {
    dose: usize,
    n: u32,
    m: u32,
    observed: Option<f64>,
    isotonic: Option<f64>,
    candidate: bool,
    distance: Option<f64>,
}

/// One-based selection report.
#[derive(Debug, Serialize)]
struct SelectionView {
    selected: Option<usize>,
    tie_rule: Option<boin_core::TieRule>,
    note: String,
    doses: Vec<DoseRow>,
}

impl SelectionView {
    fn new(state: &TrialState, report: &boin_core::SelectionReport) -> Self {
        let doses = state
            .counts
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = report.candidates.iter().position(|&d| d == j);
                DoseRow {
                    dose: j + 1,
                    n: c.n,
                    m: c.m,
                    observed: report.observed[j],
                    isotonic: report.isotonic[j],
                    candidate: k.is_some(),
                    distance: k.map(|k| report.distances[k]),
                }
            })
            .collect();
        SelectionView {
            selected: report.selected.map(|d| d + 1),
            tie_rule: report.tie_rule,
            note: report.note.clone(),
            doses,
        }
    }

    fn csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dose", "n", "m", "observed", "isotonic", "candidate", "selected"])
            .expect("in-memory write");
        for d in &self.doses {
            w.write_record([
                d.dose.to_string(),
                d.n.to_string(),
                d.m.to_string(),
                f(d.observed),
                f(d.isotonic),
                d.candidate.to_string(),
                (self.selected == Some(d.dose)).to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
    }

    fn markdown(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut s =
            String::from("| dose | n | m | observed | isotonic | candidate |\n|---:|---:|---:|---:|---:|:---:|\n");
        for d in &self.doses {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                d.dose,
                d.n,
                d.m,
                f(d.observed),
                f(d.isotonic),
                if d.candidate { "yes" } else { "no" }
            );
        }
        match self.selected {
            Some(d) => {
                let _ = writeln!(s, "\nMTD: dose {d}");
            }
            None => {
                let _ = writeln!(s, "\nMTD: none");
            }
        }
        if !self.note.is_empty() {
            let _ = writeln!(s, "{}", self.note);
        }
        s
    }
}

fn scenarios_csv(list: &[Scenario], doses: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string(), "mtd".into(), "average_gap".into()];
    header.extend((1..=doses).map(|j| format!("p{j}")));
    let io = |e: csv::Error| Error::State(format!("cannot write CSV: {e}"));
    w.write_record(&header).map_err(io)?;
    for s in list {
        let mut rec = vec![
            s.label.clone(),
            (s.mtd_index + 1).to_string(),
            format!("{:.6}", s.average_gap()),
        ];
        rec.extend(s.probs.iter().map(|p| format!("{p:.6}")));
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::State(format!("cannot write CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

fn parse_workers(workers: Option<&str>) -> Result<Option<usize>> {
    match workers.map(str::trim) {
        None | Some("") => Ok(None),
        Some(w) => match w.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::parameter(
                crate::WORKERS_ENV,
                format!("expected a positive integer, got '{w}'"),
            )),
        },
    }
}

fn campaign_from_flags(args: &SimulateArgs, seed: u64) -> Result<CampaignConfig> {
    if args.designs.is_empty() {
        return Err(Error::parameter("designs", "--designs is required without --config"));
    }
    let scenario_source = match args.scenarios.as_str() {
        "table4" => ScenarioSourceConfig::Table4,
        "random" => ScenarioSourceConfig::Random(RandomSourceConfig {
            generator: args.generator.config()?,
            target_gap: args.target_gap,
            calibration_samples: args.calibration_samples,
        }),
        path => ScenarioSourceConfig::File(PathBuf::from(path)),
    };
    if args.target_gap.is_some() && args.scenarios != "random" {
        return Err(Error::parameter("target-gap", "only applies to --scenarios random"));
    }
    Ok(CampaignConfig {
        designs: args
            .designs
            .iter()
            .map(|d| DesignEntry::Name(canonical_design(d.trim()).to_string()))
            .collect(),
        spec: Some(args.spec.build(Some(0.25))?),
        replicates: args.reps,
        seed,
        scenario_source,
        poor_allocation: match args.poor_allocation {
            PoorRule::AtMost => PoorAllocationRule::AtMost,
            PoorRule::Below => PoorAllocationRule::Below,
        },
    })
}

fn simulate(args: SimulateArgs, out: &mut dyn Write, workers: Option<&str>) -> Result<(), CliError> {
    require_format(args.format, &[Format::Csv, Format::Json, Format::Markdown], "simulate")?;
    let (config, base_dir) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut config = CampaignConfig::from_json(&text)?;
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            (config, path.parent().map(Path::to_path_buf))
        }
        None => (campaign_from_flags(&args, require_seed(args.seed)?)?, None),
    };
    let mut resolved = config.resolve(base_dir.as_deref())?;
    resolved.settings.workers = parse_workers(workers)?;
    let rows = run_campaign(&resolved.designs, &resolved.source, &resolved.settings)?;

    let text = match args.format {
        Format::Json => json(&rows),
        Format::Markdown => summary_markdown(&rows),
        _ => {
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            String::from_utf8(buf).expect("ascii")
        }
    };
    emit(&text, args.out.as_deref(), out)?;
    let sidecar = args
        .metadata
        .clone()
        .or_else(|| args.out.as_ref().map(|p| p.with_extension("meta.json")));
    if let Some(path) = sidecar {
        emit(&json(&resolved.metadata), Some(&path), out)?;
    }
    Ok(())
}

fn summary_markdown(rows: &[OperatingCharacteristics]) -> String {
    let mut s = String::from(
        "| scenario | design | MTD selection % | patients at MTD | poor allocation % | high toxicity % | sample size |\n\
         |---|---|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {:.1} | {:.1} | {:.1} | {:.1} | {:.1} |",
            r.scenario,
            r.design,
            r.mtd_selection_pct.mean,
            r.patients_at_mtd.mean,
            r.risk_poor_allocation_pct.mean,
            r.risk_high_toxicity_pct.mean,
            r.avg_sample_size.mean
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use boin_sim::ScenarioGenConfig;

    #[test]
    fn worker_values() {
        assert_eq!(parse_workers(None).unwrap(), None);
        assert_eq!(parse_workers(Some("4")).unwrap(), Some(4));
        assert!(parse_workers(Some("0")).is_err());
        assert!(parse_workers(Some("many")).is_err());
    }

    #[test]
    fn generator_defaults_match_library() {
        let a = GeneratorArgs {
            sigma0: 0.05,
            sigma1: 0.35,
            sigma2: 0.35,
            mu1: 0.0,
            mu2: 0.0,
        };
        assert_eq!(a.config().unwrap(), ScenarioGenConfig::default());
    }
}
