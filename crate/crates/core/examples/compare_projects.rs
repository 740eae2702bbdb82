//! Contrasts two communities: how long candidates wait for commit rights,
//! with a Mann-Whitney U test and Cliff's delta.

use commitgate::calendar::add_months;
use commitgate::identity::{resolve_identities, ResolveOptions};
use commitgate::ingest::{normalize, NormalizeOptions};
use commitgate::lifecycle::{cliffs_delta, detect_immigrations, immigration_rate, mann_whitney_u, LifecycleConfig};
use commitgate::synthetic::{community, epoch};

fn intervals(seed: u64, people: usize) -> Result<(Vec<f64>, f64), Box<dyn std::error::Error>> {
    let c = community(seed, people, 30);
    let stream = normalize(c.focal_commits, c.focal_events, &NormalizeOptions::default());
    let ids = resolve_identities(&stream, &ResolveOptions::default());
    let (events, pool) = detect_immigrations(&stream, &ids, &[], add_months(epoch(), 30), &LifecycleConfig::default())?;
    let waits = events.iter().filter(|e| !e.censored()).map(|e| e.transition_interval).collect();
    Ok((waits, immigration_rate(&pool)?))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (a, rate_a) = intervals(21, 60)?;
    let (b, rate_b) = intervals(22, 30)?;
    println!("project A: {} immigrants, rate {rate_a:.2}", a.len());
    println!("project B: {} immigrants, rate {rate_b:.2}", b.len());
    let mw = mann_whitney_u(&a, &b)?;
    println!("Mann-Whitney U = {:.1}, z = {:.3}, p = {:.4}", mw.u_a, mw.z, mw.p);
    println!("Cliff's delta = {:.3}", cliffs_delta(&a, &b)?);
    Ok(())
}
