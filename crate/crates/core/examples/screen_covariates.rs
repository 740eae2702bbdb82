//! Z-score outlier removal followed by iterative VIF screening.

use commitgate::survival::{vif_screen, vifs, zscore_filter, SurvRow, SurvivalData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<SurvRow> = (0..300)
        .map(|i| {
            let commits: f64 = rng.random_range(0.0..20.0);
            let files = 2.5 * commits + rng.random_range(-1.0..1.0);
            let comments: f64 = if i == 7 { 400.0 } else { rng.random_range(0.0..30.0) };
            let reviews: f64 = rng.random_range(0.0..5.0);
            SurvRow {
                id: format!("dev{}", i / 10),
                start: f64::from(i % 10),
                stop: f64::from(i % 10 + 1),
                event: i % 10 == 9 && rng.random_bool(0.5),
                x: vec![commits, files, comments, reviews],
            }
        })
        .collect();
    let data = SurvivalData::numeric(&["commit", "file_modified", "all_comment", "pr_review"], rows)?;

    let (data, z) = zscore_filter(&data, 3.0)?;
    println!("z-score: {} -> {} rows, removed by {:?}", z.rows_before, z.rows_after, z.removed_by);
    for (name, v) in data.names().iter().zip(vifs(&data)) {
        println!("  VIF {name:<14} {v:>8.2}");
    }
    let (kept, report) = vif_screen(&data, 5.0)?;
    for (name, v) in &report.dropped {
        println!("dropped {name} (VIF {v:.2})");
    }
    println!("kept {:?}", kept.names());
    Ok(())
}
