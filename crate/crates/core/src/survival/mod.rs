//! Hazard models over counting-process data: Cox partial likelihood with
//! time-varying covariates, the piecewise-exponential model, screening
//! (outliers, collinearity), and kernel-smoothed hazard curves.

mod cox;
mod hazard;
mod linalg;
mod pwe;
mod screen;

pub use cox::{fit_cox_tvc, log_partial_likelihood, model_tests, BaselineInterval, CoxFit, CoxOptions, LikelihoodParts, ModelTests, TestStat, Ties};
pub use hazard::{nelson_aalen, smoothed_hazard, HazardOptions};
pub use pwe::{default_cuts, fit_piecewise_exponential, PweFit};
pub use screen::{vif_screen, vifs, zscore_filter, VifReport, ZscoreReport};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::metrics::{Covariate, PanelRow};
use crate::synthetic::SimSubject;

/// Coefficients beyond this magnitude signal monotone likelihood.
pub const SEPARATION_BOUND: f64 = 15.0;

#[derive(Debug, thiserror::Error)]
pub enum SurvivalError {
    #[error("no rows")]
    Empty,
    #[error("no events")]
    NoEvents,
    #[error("row {index}: {reason}")]
    BadRow { index: usize, reason: String },
    #[error("covariate {name} is missing on row {row}")]
    MissingCovariate { name: String, row: usize },
    #[error("log partial likelihood is not finite at beta = 0")]
    NonFiniteAtZero,
    #[error("information matrix is singular; collinear or constant covariates: {}", .covariates.join(", "))]
    Singular { covariates: Vec<String> },
    #[error("interval ({lower}, {upper}] has zero exposure")]
    ZeroExposure { lower: f64, upper: f64 },
    #[error("invalid cut points: {0}")]
    BadCuts(String),
    #[error("invalid threshold: {0}")]
    Threshold(String),
    #[error("design is singular after screening; collinear set: {}", .0.join(", "))]
    CollinearDesign(Vec<String>),
    #[error("fit did not converge")]
    NotConverged,
    #[error("beta has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvRow {
    pub id: String,
    pub start: f64,
    pub stop: f64,
    pub event: bool,
    pub x: Vec<f64>,
}

fn cmp_rows(a: &SurvRow, b: &SurvRow) -> Ordering {
    a.stop
        .total_cmp(&b.stop)
        .then(a.start.total_cmp(&b.start))
        .then(a.event.cmp(&b.event))
        .then_with(|| a.id.cmp(&b.id))
        .then_with(|| {
            a.x.iter()
                .zip(&b.x)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Rows of (start, stop] intervals with an event flag at `stop`. Rows are
/// kept in a canonical order, so input order never affects a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalData {
    names: Vec<String>,
    kinds: Vec<CovariateKind>,
    rows: Vec<SurvRow>,
}

impl SurvivalData {
    pub fn new(names: Vec<String>, kinds: Vec<CovariateKind>, mut rows: Vec<SurvRow>) -> Result<Self, SurvivalError> {
        if names.len() != kinds.len() {
            return Err(SurvivalError::Dimension { expected: names.len(), got: kinds.len() });
        }
        for (index, r) in rows.iter().enumerate() {
            let bad = |reason: &str| SurvivalError::BadRow { index, reason: reason.into() };
            if r.x.len() != names.len() {
                return Err(bad(&format!("{} covariates, expected {}", r.x.len(), names.len())));
            }
            if !(r.start.is_finite() && r.stop.is_finite()) || r.start >= r.stop {
                return Err(bad("need finite start < stop"));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite covariate"));
            }
        }
        rows.sort_by(cmp_rows);
        Ok(Self { names, kinds, rows })
    }

    /// All-numeric covariates.
    pub fn numeric(names: &[&str], rows: Vec<SurvRow>) -> Result<Self, SurvivalError> {
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            vec![CovariateKind::Numeric; names.len()],
            rows,
        )
    }

    pub fn from_panel(panel: &[PanelRow], covariates: &[Covariate]) -> Result<Self, SurvivalError> {
        let mut rows = Vec::with_capacity(panel.len());
        for (i, p) in panel.iter().enumerate() {
            let x = covariates
                .iter()
                .map(|c| p.get(*c).ok_or_else(|| SurvivalError::MissingCovariate { name: c.name().into(), row: i }))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(SurvRow { id: p.dev.to_string(), start: p.start, stop: p.stop, event: p.y, x });
        }
        Self::new(
            covariates.iter().map(|c| c.name().to_string()).collect(),
            covariates
                .iter()
                .map(|c| if c.is_categorical() { CovariateKind::Categorical } else { CovariateKind::Numeric })
                .collect(),
            rows,
        )
    }

    /// One row (0, time] per subject with the single covariate `x`.
    pub fn from_subjects(subjects: &[SimSubject]) -> Result<Self, SurvivalError> {
        let rows = subjects
            .iter()
            .enumerate()
            .map(|(i, s)| SurvRow { id: format!("s{i:06}"), start: 0.0, stop: s.time, event: s.event, x: vec![s.x] })
            .collect();
        Self::numeric(&["x"], rows)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[CovariateKind] {
        &self.kinds
    }

    pub fn rows(&self) -> &[SurvRow] {
        &self.rows
    }

    pub fn n_covariates(&self) -> usize {
        self.names.len()
    }

    pub fn n_events(&self) -> usize {
        self.rows.iter().filter(|r| r.event).count()
    }

    pub fn max_stop(&self) -> f64 {
        self.rows.iter().map(|r| r.stop).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distinct event times, ascending.
    pub fn event_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.rows.iter().filter(|r| r.event).map(|r| r.stop).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Keeps the listed columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Self {
        Self {
            names: columns.iter().map(|&j| self.names[j].clone()).collect(),
            kinds: columns.iter().map(|&j| self.kinds[j]).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| SurvRow { x: columns.iter().map(|&j| r.x[j]).collect(), ..r.clone() })
                .collect(),
        }
    }

    pub fn select_names(&self, names: &[String]) -> Self {
        let cols: Vec<usize> = names.iter().filter_map(|n| self.names.iter().position(|m| m == n)).collect();
        self.select(&cols)
    }

    pub fn retain_rows(&self, mut keep: impl FnMut(&SurvRow) -> bool) -> Self {
        Self { rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(), ..self.clone() }
    }

    /// Multiplies covariate `j` by `c`.
    pub fn scale_column(&self, j: usize, c: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.x[j] *= c;
        }
        out.rows.sort_by(cmp_rows);
        out
    }

    pub(crate) fn column_means(&self) -> Vec<f64> {
        let n = self.rows.len().max(1) as f64;
        (0..self.names.len()).map(|j| self.rows.iter().map(|r| r.x[j]).sum::<f64>() / n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_canonically_ordered() {
        let r = |id: &str, stop: f64| SurvRow { id: id.into(), start: 0.0, stop, event: false, x: vec![1.0] };
        let a = SurvivalData::numeric(&["x"], vec![r("b", 2.0), r("a", 1.0), r("c", 2.0)]).unwrap();
        let b = SurvivalData::numeric(&["x"], vec![r("c", 2.0), r("b", 2.0), r("a", 1.0)]).unwrap();
        assert_eq!(a, b);
        assert!(SurvivalData::numeric(&["x"], vec![r("a", 0.0)]).is_err());
    }
}
