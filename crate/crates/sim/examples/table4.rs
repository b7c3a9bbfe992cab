//! Fixed-scenario comparison of all registered designs.
//!
//! cargo run --release -p boin-sim --example table4 -- [replicates] [seed] [design,...] [at_most|below]

use std::sync::Arc;
use std::time::Instant;

use boin_core::DesignSpec;
use boin_designs::{build_design, DesignPolicy, DESIGN_NAMES};
use boin_sim::{fixed_scenarios, run_campaign, CampaignSettings, ScenarioSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2024);
    let names: Vec<String> = match args.next() {
        Some(list) => list.split(',').map(str::to_string).collect(),
        None => DESIGN_NAMES.iter().map(|s| s.to_string()).collect(),
    };

    let mut settings = CampaignSettings::new(replicates, seed);
    if let Some(rule) = args.next() {
        settings.poor_allocation = serde_json::from_value(serde_json::Value::String(rule))?;
    }

    let spec = DesignSpec::with_target(0.25);
    let designs: Vec<Arc<dyn DesignPolicy>> = names
        .iter()
        .map(|name| build_design(name, spec.clone(), None))
        .collect::<Result<_, _>>()?;
    let start = Instant::now();
    let rows = run_campaign(&designs, &ScenarioSource::Fixed(fixed_scenarios()), &settings)?;
    println!(
        "{:<11} {:<15} {:>6} {:>6} {:>6} {:>6}   selection % by dose",
        "scenario", "design", "sel%", "n_mtd", "poor%", "hitox%"
    );
    for r in &rows {
        let sel: Vec<String> = r.selection_pct.iter().map(|v| format!("{v:5.1}")).collect();
        println!(
            "{:<11} {:<15} {:>6.1} {:>6.1} {:>6.1} {:>6.1}   {}",
            r.scenario,
            r.design,
            r.mtd_selection_pct.mean,
            r.patients_at_mtd.mean,
            r.risk_poor_allocation_pct.mean,
            r.risk_high_toxicity_pct.mean,
            sel.join(" ")
        );
        if std::env::var_os("SHOW_PATIENTS").is_some() {
            let n: Vec<String> = r.patients_per_dose.iter().map(|v| format!("{v:5.1}")).collect();
            println!("{:<66}{}", "", n.join(" "));
        }
    }
    eprintln!("{replicates} replicates in {:.1?}", start.elapsed());
    Ok(())
}
