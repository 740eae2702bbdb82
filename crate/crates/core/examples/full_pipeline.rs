//! Generates a synthetic two-repository community, runs every stage, and
//! prints the coefficient table.
//!
//!     cargo run --example full_pipeline -- [seed]

use commitgate::pipeline::{render_coefficient_table, run_pipeline, Format, RunConfig};
use commitgate::synthetic::write_community_project;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(11);
    let dir = std::env::temp_dir().join(format!("commitgate-demo-{seed}"));
    let config = write_community_project(&dir, seed, 60, 30)?;
    let cfg = RunConfig::from_file(&config)?;
    let bundle = run_pipeline(&cfg)?;
    let diag = bundle.diagnostics.as_ref().expect("full run");
    println!("{:#?}", diag.summary);
    for d in &diag.dropped {
        println!("dropped {:<22} {:<7} {}", d.covariate, d.rule, d.detail);
    }
    println!("\n{}", render_coefficient_table(&diag.fit, Format::Markdown));
    println!("artifacts in {}", bundle.output_dir.display());
    for (name, hash) in &bundle.manifest.artifacts {
        println!("  {name:<18} {}", &hash[..16]);
    }
    std::process::exit(bundle.exit_code());
}
