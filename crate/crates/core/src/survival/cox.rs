use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{quad, spd_inverse};
use super::pwe::validate_cuts;
use super::{SurvivalData, SurvivalError, SEPARATION_BOUND};
use crate::special::{chi2_sf, normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

impl std::str::FromStr for Ties {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "efron" => Ok(Ties::Efron),
            "breslow" => Ok(Ties::Breslow),
            _ => Err(format!("unknown tie method {s:?} (efron or breslow)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxOptions {
    pub ties: Ties,
    pub tol: f64,
    pub max_iter: usize,
    /// Boundaries c_0 < ... < c_K for the post-hoc baseline; event-time
    /// deciles when `None`.
    pub baseline_cuts: Option<Vec<f64>>,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { ties: Ties::Efron, tol: 1e-8, max_iter: 100, baseline_cuts: None }
    }
}

/// Log partial likelihood with its gradient and observed information.
#[derive(Debug, Clone)]
pub struct LikelihoodParts {
    pub loglik: f64,
    pub gradient: DVector<f64>,
    pub information: DMatrix<f64>,
}

/// Rows of centered covariates. Centering leaves the partial likelihood
/// unchanged and keeps exp(x'beta) well scaled.
struct Centered<'a> {
    data: &'a SurvivalData,
    x: Vec<DVector<f64>>,
}

impl<'a> Centered<'a> {
    fn new(data: &'a SurvivalData) -> Self {
        let means = DVector::from_vec(data.column_means());
        let x = data.rows().iter().map(|r| DVector::from_column_slice(&r.x) - &means).collect();
        Self { data, x }
    }

    fn parts(&self, beta: &DVector<f64>, ties: Ties, second_order: bool) -> LikelihoodParts {
        let p = beta.len();
        let rows = self.data.rows();
        let eta: Vec<f64> = self.x.iter().map(|x| x.dot(beta)).collect();
        let w: Vec<f64> = eta.iter().map(|e| e.exp()).collect();

        let mut loglik = 0.0;
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for t in self.data.event_times() {
            let (mut s0, mut s1, mut s2) = (0.0, DVector::zeros(p), DMatrix::zeros(p, p));
            let (mut d0, mut d1, mut d2) = (0.0, DVector::zeros(p), DMatrix::zeros(p, p));
            let mut deaths = 0usize;
            for (i, r) in rows.iter().enumerate() {
                if !(r.start < t && t <= r.stop) {
                    continue;
                }
                let xi = &self.x[i];
                s0 += w[i];
                s1.axpy(w[i], xi, 1.0);
                if second_order {
                    s2.ger(w[i], xi, xi, 1.0);
                }
                if r.event && r.stop == t {
                    deaths += 1;
                    loglik += eta[i];
                    grad += xi;
                    d0 += w[i];
                    d1.axpy(w[i], xi, 1.0);
                    if second_order {
                        d2.ger(w[i], xi, xi, 1.0);
                    }
                }
            }
            let d = deaths as f64;
            for r in 0..deaths {
                let f = match ties {
                    Ties::Efron => r as f64 / d,
                    Ties::Breslow => 0.0,
                };
                let den = s0 - f * d0;
                let num1 = &s1 - &d1 * f;
                loglik -= den.ln();
                grad.axpy(-1.0 / den, &num1, 1.0);
                if second_order {
                    let num2 = &s2 - &d2 * f;
                    info += num2 / den;
                    info.ger(-1.0 / (den * den), &num1, &num1, 1.0);
                }
            }
        }
        LikelihoodParts { loglik, gradient: grad, information: info }
    }
}

fn check_beta(data: &SurvivalData, beta: &[f64]) -> Result<(), SurvivalError> {
    if beta.len() != data.n_covariates() {
        return Err(SurvivalError::Dimension { expected: data.n_covariates(), got: beta.len() });
    }
    Ok(())
}

/// Log partial likelihood, gradient, and observed information at `beta`.
/// The risk set at an event time t is every row with start < t <= stop.
pub fn log_partial_likelihood(data: &SurvivalData, beta: &[f64], ties: Ties) -> Result<LikelihoodParts, SurvivalError> {
    check_beta(data, beta)?;
    if data.n_events() == 0 {
        return Err(SurvivalError::NoEvents);
    }
    Ok(Centered::new(data).parts(&DVector::from_column_slice(beta), ties, true))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineInterval {
    pub lower: f64,
    pub upper: f64,
    /// Log of the mean baseline hazard over (lower, upper]; `None` when the
    /// interval holds no events.
    pub log_hazard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    pub exp_beta: Vec<f64>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub loglik_null: f64,
    pub loglik_fit: f64,
    pub lr_stat: f64,
    pub wald_stat: f64,
    pub score_stat: f64,
    pub df: usize,
    pub ties: Ties,
    pub baseline: Vec<BaselineInterval>,
    pub converged: bool,
    pub iterations: usize,
    pub n_rows: usize,
    pub n_events: usize,
    pub diagnostics: Vec<String>,
}

/// Newton-Raphson with step halving on the partial likelihood.
pub fn fit_cox_tvc(data: &SurvivalData, opts: &CoxOptions) -> Result<CoxFit, SurvivalError> {
    let p = data.n_covariates();
    if data.rows().is_empty() {
        return Err(SurvivalError::Empty);
    }
    if data.n_events() == 0 {
        return Err(SurvivalError::NoEvents);
    }
    let names = data.names();
    let c = Centered::new(data);
    let mut diagnostics = Vec::new();
    let epv = data.n_events() as f64 / p.max(1) as f64;
    if epv < 10.0 {
        let msg = format!("events per covariate is {epv:.1}, below 10; estimates may be unstable");
        log::warn!("{msg}");
        diagnostics.push(msg);
    }

    let mut beta = DVector::zeros(p);
    let null = c.parts(&beta, opts.ties, true);
    if !null.loglik.is_finite() {
        return Err(SurvivalError::NonFiniteAtZero);
    }
    let null_inv = spd_inverse(&null.information, names)?;
    let score_stat = quad(&null.gradient, &null_inv);

    let mut cur = null.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let step = spd_inverse(&cur.information, names)? * &cur.gradient;
        let mut scale = 1.0;
        let mut next_beta = &beta + &step;
        let mut next = c.parts(&next_beta, opts.ties, true);
        let mut halvings = 0;
        while (!next.loglik.is_finite() || next.loglik < cur.loglik) && halvings < 40 {
            scale *= 0.5;
            halvings += 1;
            next_beta = &beta + &step * scale;
            next = c.parts(&next_beta, opts.ties, true);
        }
        let delta = (next.loglik - cur.loglik).abs();
        beta = next_beta;
        cur = next;
        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            let worst: Vec<&str> = (0..p).filter(|&j| beta[j].abs() > SEPARATION_BOUND).map(|j| names[j].as_str()).collect();
            let msg = format!("monotone likelihood: |beta| exceeds {SEPARATION_BOUND} for {}", worst.join(", "));
            log::warn!("{msg}");
            diagnostics.push(msg);
            break;
        }
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged && !diagnostics.iter().any(|d| d.starts_with("monotone")) {
        diagnostics.push(format!("no convergence within {} iterations", opts.max_iter));
    }

    let cov = spd_inverse(&cur.information, names)?;
    let se: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let z: Vec<f64> = (0..p).map(|j| if se[j] > 0.0 { beta[j] / se[j] } else { f64::NAN }).collect();
    let pv: Vec<f64> = z.iter().map(|z| (2.0 * normal_sf(z.abs())).min(1.0)).collect();
    let wald_stat = quad(&beta, &cur.information);

    let cuts = match &opts.baseline_cuts {
        Some(c) => {
            validate_cuts(c, data)?;
            c.clone()
        }
        None => super::pwe::default_cuts(data, 10),
    };
    let baseline = breslow_baseline(data, beta.as_slice(), &cuts);

    Ok(CoxFit {
        covariate_names: names.to_vec(),
        exp_beta: beta.iter().map(|b| b.exp()).collect(),
        beta: beta.iter().copied().collect(),
        se,
        z,
        p: pv,
        covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        loglik_null: null.loglik,
        loglik_fit: cur.loglik,
        lr_stat: 2.0 * (cur.loglik - null.loglik),
        wald_stat,
        score_stat,
        df: p,
        ties: opts.ties,
        baseline,
        converged,
        iterations,
        n_rows: data.rows().len(),
        n_events: data.n_events(),
        diagnostics,
    })
}

/// Breslow increments d_j / sum_{risk} exp(x'beta) (raw covariates, so the
/// baseline refers to x = 0), averaged per interval.
fn breslow_baseline(data: &SurvivalData, beta: &[f64], cuts: &[f64]) -> Vec<BaselineInterval> {
    let rows = data.rows();
    let w: Vec<f64> = rows.iter().map(|r| r.x.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>().exp()).collect();
    let increments: Vec<(f64, f64)> = data
        .event_times()
        .into_iter()
        .map(|t| {
            let mut d = 0.0;
            let mut s0 = 0.0;
            for (i, r) in rows.iter().enumerate() {
                if r.start < t && t <= r.stop {
                    s0 += w[i];
                    if r.event && r.stop == t {
                        d += 1.0;
                    }
                }
            }
            (t, d / s0)
        })
        .collect();
    cuts.windows(2)
        .map(|c| {
            let mass: f64 = increments.iter().filter(|(t, _)| c[0] < *t && *t <= c[1]).map(|(_, h)| h).sum();
            BaselineInterval {
                lower: c[0],
                upper: c[1],
                log_hazard: (mass > 0.0).then(|| (mass / (c[1] - c[0])).ln()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestStat {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

impl TestStat {
    fn new(statistic: f64, df: usize) -> Self {
        Self { statistic, df, p: chi2_sf(statistic.max(0.0), df as f64) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelTests {
    pub likelihood_ratio: TestStat,
    pub wald: TestStat,
    pub score: TestStat,
}

/// Global likelihood-ratio, Wald, and score tests.
pub fn model_tests(fit: &CoxFit) -> Result<ModelTests, SurvivalError> {
    if !fit.converged {
        return Err(SurvivalError::NotConverged);
    }
    Ok(ModelTests {
        likelihood_ratio: TestStat::new(fit.lr_stat, fit.df),
        wald: TestStat::new(fit.wald_stat, fit.df),
        score: TestStat::new(fit.score_stat, fit.df),
    })
}
