use super::SurvivalData;

#[derive(Debug, Clone, PartialEq)]
pub struct HazardOptions {
    /// Kernel half-width in months; 1.5 times the median gap between
    /// distinct event times when `None`.
    pub bandwidth: Option<f64>,
    pub grid_step: f64,
}

impl Default for HazardOptions {
    fn default() -> Self {
        Self { bandwidth: None, grid_step: 0.25 }
    }
}

/// Nelson-Aalen increments (t, dN(t) / R(t)) at the distinct event times.
pub fn nelson_aalen(data: &SurvivalData) -> Vec<(f64, f64)> {
    data.event_times()
        .into_iter()
        .map(|t| {
            let (mut d, mut r) = (0usize, 0usize);
            for row in data.rows().iter().filter(|row| row.start < t && t <= row.stop) {
                r += 1;
                d += usize::from(row.event && row.stop == t);
            }
            (t, d as f64 / r as f64)
        })
        .collect()
}

fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

pub(crate) fn default_bandwidth(times: &[f64]) -> f64 {
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return 1.0;
    }
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    let median = if gaps.len() % 2 == 0 { 0.5 * (gaps[mid - 1] + gaps[mid]) } else { gaps[mid] };
    1.5 * median
}

/// Epanechnikov-smoothed Nelson-Aalen hazard on a grid from 0 to the last
/// observed time. Kernel mass that would fall below t = 0 is reflected
/// back, so each increment keeps its full mass. Empty without events.
pub fn smoothed_hazard(data: &SurvivalData, opts: &HazardOptions) -> Vec<(f64, f64)> {
    let inc = nelson_aalen(data);
    if inc.is_empty() {
        return Vec::new();
    }
    let times: Vec<f64> = inc.iter().map(|(t, _)| *t).collect();
    let b = opts.bandwidth.unwrap_or_else(|| default_bandwidth(&times));
    let end = data.max_stop();
    let steps = (end / opts.grid_step).floor() as usize;
    (0..=steps)
        .map(|k| {
            let t = k as f64 * opts.grid_step;
            let h: f64 = inc
                .iter()
                .map(|(tj, dl)| dl * (epanechnikov((t - tj) / b) + epanechnikov((t + tj) / b)) / b)
                .sum();
            (t, h)
        })
        .collect()
}
