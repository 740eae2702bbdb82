//! Finds candidates, founding committers and committer immigrations in a
//! synthetic community.

use commitgate::calendar::add_months;
use commitgate::identity::{resolve_identities, ResolveOptions};
use commitgate::ingest::{normalize, NormalizeOptions};
use commitgate::lifecycle::{
    committer_proportion, detect_immigrations, immigration_rate, write_immigrations_csv, LifecycleConfig,
};
use commitgate::synthetic::{community, epoch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = community(4, 40, 24);
    let stream = normalize(c.focal_commits, c.focal_events, &NormalizeOptions::default());
    let ids = resolve_identities(&stream, &ResolveOptions::default());
    let collection = add_months(epoch(), 24);
    let (events, pool) = detect_immigrations(&stream, &ids, &[], collection, &LifecycleConfig::default())?;

    println!("developers            {}", ids.len());
    println!("founding committers   {}", pool.founding_committers.len());
    println!("candidates            {}", pool.candidates.len());
    println!("immigrants            {}", pool.immigrants.len());
    println!("committer proportion  {:.3}", committer_proportion(&stream, &ids)?);
    println!("immigration rate      {:.3}", immigration_rate(&pool)?);
    for (dev, why) in &pool.exclusions {
        println!("excluded {dev}: {why}");
    }
    println!();
    print!("{}", write_immigrations_csv(&events).lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
