//! Nelson-Aalen increments smoothed with an Epanechnikov kernel, drawn as a
//! text plot.

use commitgate::survival::{nelson_aalen, smoothed_hazard, HazardOptions, SurvivalData};
use commitgate::synthetic::simulate_piecewise_exponential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a hazard that drops after month 6
    let subjects = simulate_piecewise_exponential(9, 600, 0.0, &[6.0], &[0.08f64.ln(), 0.02f64.ln()], 24.0);
    let data = SurvivalData::from_subjects(&subjects)?;
    println!("{} distinct event times", nelson_aalen(&data).len());

    let curve = smoothed_hazard(&data, &HazardOptions { bandwidth: Some(2.0), grid_step: 1.0 });
    let top = curve.iter().map(|(_, h)| *h).fold(0.0, f64::max);
    for (t, h) in &curve {
        let bar = "#".repeat((h / top * 50.0).round() as usize);
        println!("{t:>5.1}  {h:.4}  {bar}");
    }
    Ok(())
}
