use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::spd_inverse;
use super::{SurvivalData, SurvivalError, SEPARATION_BOUND};

/// Piecewise-exponential fit: hazard exp(a_k) * exp(x'beta) on (c_{k-1}, c_k].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PweFit {
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    pub se_beta: Vec<f64>,
    pub cuts: Vec<f64>,
    /// `None` for intervals without events (the MLE is minus infinity).
    pub interval_log_hazards: Vec<Option<f64>>,
    pub se_log_hazards: Vec<Option<f64>>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Boundaries 0 = c_0 < ... < c_K = max stop, with interior cuts at the
/// deciles (or other `k`-quantiles) of the distinct event times.
pub fn default_cuts(data: &SurvivalData, k: usize) -> Vec<f64> {
    let end = data.max_stop();
    let lower = data.rows().iter().map(|r| r.start).fold(0.0f64, f64::min);
    let times = data.event_times();
    let mut cuts = vec![lower];
    if !times.is_empty() {
        for q in 1..k {
            let pos = q as f64 / k as f64 * (times.len() - 1) as f64;
            let c = times[pos.round() as usize];
            if c > *cuts.last().unwrap() && c < end {
                cuts.push(c);
            }
        }
    }
    if end > *cuts.last().unwrap() {
        cuts.push(end);
    }
    cuts
}

pub(crate) fn validate_cuts(cuts: &[f64], data: &SurvivalData) -> Result<(), SurvivalError> {
    if cuts.len() < 2 {
        return Err(SurvivalError::BadCuts("need at least two boundaries".into()));
    }
    if cuts.windows(2).any(|w| !(w[0] < w[1])) || cuts.iter().any(|c| !c.is_finite()) {
        return Err(SurvivalError::BadCuts("boundaries must be finite and strictly increasing".into()));
    }
    let lo = data.rows().iter().map(|r| r.start).fold(f64::INFINITY, f64::min);
    if cuts[0] > lo || *cuts.last().unwrap() < data.max_stop() {
        return Err(SurvivalError::BadCuts(format!(
            "boundaries [{}, {}] do not cover the observed range [{lo}, {}]",
            cuts[0],
            cuts.last().unwrap(),
            data.max_stop()
        )));
    }
    Ok(())
}

struct Episode {
    interval: usize,
    exposure: f64,
    event: bool,
    row: usize,
}

fn split_episodes(data: &SurvivalData, cuts: &[f64]) -> Vec<Episode> {
    let mut out = Vec::new();
    for (row, r) in data.rows().iter().enumerate() {
        for (k, w) in cuts.windows(2).enumerate() {
            let lo = r.start.max(w[0]);
            let hi = r.stop.min(w[1]);
            if hi > lo {
                out.push(Episode {
                    interval: k,
                    exposure: hi - lo,
                    event: r.event && r.stop > w[0] && r.stop <= w[1],
                    row,
                });
            }
        }
    }
    out
}

/// Maximizes sum[y (a_k + x'beta) - exposure exp(a_k + x'beta)] over
/// episode-split rows by Newton-Raphson with step halving.
pub fn fit_piecewise_exponential(data: &SurvivalData, cuts: &[f64], tol: f64, max_iter: usize) -> Result<PweFit, SurvivalError> {
    if data.rows().is_empty() {
        return Err(SurvivalError::Empty);
    }
    validate_cuts(cuts, data)?;
    let k_all = cuts.len() - 1;
    let p = data.n_covariates();
    let episodes = split_episodes(data, cuts);

    let mut exposure = vec![0.0; k_all];
    let mut events = vec![0usize; k_all];
    for e in &episodes {
        exposure[e.interval] += e.exposure;
        events[e.interval] += usize::from(e.event);
    }
    if let Some(k) = (0..k_all).find(|&k| exposure[k] <= 0.0) {
        return Err(SurvivalError::ZeroExposure { lower: cuts[k], upper: cuts[k + 1] });
    }
    // Intervals without events have a_k = -inf and drop out of the likelihood.
    let active: Vec<usize> = (0..k_all).filter(|&k| events[k] > 0).collect();
    if active.is_empty() {
        return Err(SurvivalError::NoEvents);
    }
    let slot = |k: usize| active.iter().position(|&a| a == k);
    let m = active.len() + p;

    let means = data.column_means();
    let xc: Vec<Vec<f64>> = data.rows().iter().map(|r| r.x.iter().zip(&means).map(|(x, m)| x - m).collect()).collect();
    let eps: Vec<(usize, &Episode)> = episodes.iter().filter_map(|e| slot(e.interval).map(|s| (s, e))).collect();

    let names: Vec<String> = active
        .iter()
        .map(|&k| format!("interval ({}, {}]", cuts[k], cuts[k + 1]))
        .chain(data.names().iter().cloned())
        .collect();

    let eval = |theta: &DVector<f64>| -> (f64, DVector<f64>, DMatrix<f64>) {
        let mut ll = 0.0;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for (s, e) in &eps {
            let x = &xc[e.row];
            let lin = theta[*s] + x.iter().enumerate().map(|(j, v)| v * theta[active.len() + j]).sum::<f64>();
            let mu = e.exposure * lin.exp();
            let y = if e.event { 1.0 } else { 0.0 };
            ll += y * lin - mu;
            let r = y - mu;
            g[*s] += r;
            h[(*s, *s)] += mu;
            for j in 0..p {
                let a = active.len() + j;
                g[a] += r * x[j];
                h[(*s, a)] += mu * x[j];
                h[(a, *s)] += mu * x[j];
                for l in 0..p {
                    h[(a, active.len() + l)] += mu * x[j] * x[l];
                }
            }
        }
        (ll, g, h)
    };

    // closed-form start: the exponential MLE per interval at beta = 0
    let mut theta = DVector::zeros(m);
    for (s, &k) in active.iter().enumerate() {
        theta[s] = (events[k] as f64 / exposure[k]).ln();
    }
    let (mut ll, mut g, mut h) = eval(&theta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let step = spd_inverse(&h, &names)? * &g;
        let mut scale = 1.0;
        let mut next = &theta + &step;
        let mut cand = eval(&next);
        let mut halvings = 0;
        while (!cand.0.is_finite() || cand.0 < ll) && halvings < 40 {
            scale *= 0.5;
            halvings += 1;
            next = &theta + &step * scale;
            cand = eval(&next);
        }
        let delta = (cand.0 - ll).abs();
        theta = next;
        (ll, g, h) = cand;
        if (0..p).any(|j| theta[active.len() + j].abs() > SEPARATION_BOUND) {
            break;
        }
        if delta < tol {
            converged = true;
            break;
        }
    }

    // undo centering: a_k = a'_k - xbar'beta, with covariance by the same map
    let cov_c = spd_inverse(&h, &names)?;
    let mut lmap = DMatrix::<f64>::identity(m, m);
    for s in 0..active.len() {
        for j in 0..p {
            lmap[(s, active.len() + j)] = -means[j];
        }
    }
    let cov = &lmap * cov_c * lmap.transpose();
    let shift: f64 = (0..p).map(|j| means[j] * theta[active.len() + j]).sum();

    let mut log_h = vec![None; k_all];
    let mut se_h = vec![None; k_all];
    for (s, &k) in active.iter().enumerate() {
        log_h[k] = Some(theta[s] - shift);
        se_h[k] = Some(cov[(s, s)].max(0.0).sqrt());
    }
    Ok(PweFit {
        covariate_names: data.names().to_vec(),
        beta: (0..p).map(|j| theta[active.len() + j]).collect(),
        se_beta: (0..p).map(|j| cov[(active.len() + j, active.len() + j)].max(0.0).sqrt()).collect(),
        cuts: cuts.to_vec(),
        interval_log_hazards: log_h,
        se_log_hazards: se_h,
        loglik: ll,
        converged,
        iterations,
    })
}
