//! Builds the developer-month panel with all eighteen metrics and the two
//! controls, then lists columns too sparse to model.

use commitgate::calendar::add_months;
use commitgate::identity::{resolve_identities, ResolveOptions};
use commitgate::ingest::{normalize, EventStream, NormalizeOptions};
use commitgate::lifecycle::{detect_immigrations, LifecycleConfig};
use commitgate::metrics::{
    build_panel, sparse_covariates, write_panel_csv, ActivityIndex, Covariate, LexiconScorer, MetricsConfig,
};
use commitgate::synthetic::{community, epoch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = community(8, 30, 18);
    let focal = normalize(c.focal_commits, c.focal_events, &NormalizeOptions::default());
    let sibling = normalize(c.sibling_commits, c.sibling_events, &NormalizeOptions::default());
    let ids = resolve_identities(&EventStream::merge([focal.clone(), sibling.clone()]), &ResolveOptions::default());
    let collection = add_months(epoch(), 18);
    let (events, pool) = detect_immigrations(&focal, &ids, &[], collection, &LifecycleConfig::default())?;

    let index = ActivityIndex::build(&focal, Some(&sibling), &ids, &MetricsConfig::default(), &LexiconScorer::default());
    let panel = build_panel(&index, &pool, &events, collection)?;
    println!("{} rows for {} candidates", panel.len(), pool.candidates.len());

    let csv = write_panel_csv(&panel);
    for line in csv.lines().take(6) {
        println!("{line}");
    }
    println!();
    for (c, why) in sparse_covariates(&panel) {
        println!("{:<5} {:<20} {why}", c.code().unwrap_or_default(), c.name());
    }
    let last = panel.iter().filter(|r| r.y).count();
    println!("\n{last} rows end in an immigration; covariates per row: {}", Covariate::ALL.len());
    Ok(())
}
