//! Developer qualification metrics (M1-M18) and the monthly
//! counting-process panel.

mod activity;
mod offensive;

pub use activity::{ActivityIndex, Counter, OrgCounts};
pub use offensive::{score_offensive, LexiconScorer, OffensiveScorer, ScoreError};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::calendar::{add_months, month_index, years_between};
use crate::identity::{DevId, Denylists};
use crate::lifecycle::{CandidatePool, ImmigrationEvent};
use crate::ingest::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("candidate {dev} first appears after the collection date")]
    NoMonths { dev: DevId },
    #[error("{dev} has an immigration record but is not a candidate")]
    NotACandidate { dev: DevId },
    #[error("panel csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("panel csv line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("label config line {line}: {reason}")]
    LabelConfig { line: usize, reason: String },
}

/// Panel columns in fixed order: M1..M18, then the two controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Covariate {
    PrOpen,
    PrReview,
    Commit,
    DaysActive,
    IssueOpen,
    IssueTriage,
    AllComment,
    Communicator,
    FromCompany,
    IssueOrg,
    IssueCommentOrg,
    CommitOrg,
    CommitCommentOrg,
    CommentNewcomer,
    FileModified,
    IssueNewFeature,
    MergeRatio,
    CommentOffensive,
    Developer,
    Age,
}

pub const N_COVARIATES: usize = 20;

impl Covariate {
    pub const ALL: [Covariate; N_COVARIATES] = [
        Covariate::PrOpen,
        Covariate::PrReview,
        Covariate::Commit,
        Covariate::DaysActive,
        Covariate::IssueOpen,
        Covariate::IssueTriage,
        Covariate::AllComment,
        Covariate::Communicator,
        Covariate::FromCompany,
        Covariate::IssueOrg,
        Covariate::IssueCommentOrg,
        Covariate::CommitOrg,
        Covariate::CommitCommentOrg,
        Covariate::CommentNewcomer,
        Covariate::FileModified,
        Covariate::IssueNewFeature,
        Covariate::MergeRatio,
        Covariate::CommentOffensive,
        Covariate::Developer,
        Covariate::Age,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Covariate::PrOpen => "pr_open",
            Covariate::PrReview => "pr_review",
            Covariate::Commit => "commit",
            Covariate::DaysActive => "days_active",
            Covariate::IssueOpen => "issue_open",
            Covariate::IssueTriage => "issue_triage",
            Covariate::AllComment => "all_comment",
            Covariate::Communicator => "communicator",
            Covariate::FromCompany => "from_company",
            Covariate::IssueOrg => "issue_org",
            Covariate::IssueCommentOrg => "issue_comment_org",
            Covariate::CommitOrg => "commit_org",
            Covariate::CommitCommentOrg => "commit_comment_org",
            Covariate::CommentNewcomer => "comment_newcomer",
            Covariate::FileModified => "file_modified",
            Covariate::IssueNewFeature => "issue_new_feature",
            Covariate::MergeRatio => "merge_ratio",
            Covariate::CommentOffensive => "comment_offensive",
            Covariate::Developer => "developer",
            Covariate::Age => "age",
        }
    }

    /// "M1".."M18"; controls have no code.
    pub fn code(self) -> Option<String> {
        (self.index() < 18).then(|| format!("M{}", self.index() + 1))
    }

    pub fn is_categorical(self) -> bool {
        self == Covariate::FromCompany
    }

    pub fn is_org_scoped(self) -> bool {
        matches!(
            self,
            Covariate::IssueOrg | Covariate::IssueCommentOrg | Covariate::CommitOrg | Covariate::CommitCommentOrg
        )
    }

    /// Running totals over all previous months.
    pub fn is_cumulative(self) -> bool {
        !matches!(self, Covariate::FromCompany | Covariate::MergeRatio | Covariate::Developer | Covariate::Age)
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Covariate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Covariate::ALL
            .into_iter()
            .find(|c| c.name() == s || c.code().as_deref() == Some(s))
            .ok_or_else(|| format!("unknown covariate {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelConfig {
    pub newcomer: BTreeSet<String>,
    pub feature: BTreeSet<String>,
}

fn label_set<I: IntoIterator<Item = S>, S: AsRef<str>>(labels: I) -> BTreeSet<String> {
    labels
        .into_iter()
        .map(|l| l.as_ref().trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

impl LabelConfig {
    pub fn new<I: IntoIterator<Item = S>, J: IntoIterator<Item = T>, S: AsRef<str>, T: AsRef<str>>(
        newcomer: I,
        feature: J,
    ) -> Self {
        Self { newcomer: label_set(newcomer), feature: label_set(feature) }
    }

    /// `key = label, label` lines for `newcomer_labels` and `feature_labels`;
    /// keys left out keep their defaults.
    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| MetricsError::LabelConfig { line: i + 1, reason: reason.into() };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let set = label_set(value.split(','));
            match key.trim() {
                "newcomer_labels" => cfg.newcomer = set,
                "feature_labels" => cfg.feature = set,
                other => return Err(err(&format!("unknown key {other:?}"))),
            }
        }
        Ok(cfg)
    }
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self::new(
            ["good first issue", "good-first-issue", "first-timers-only", "help wanted"],
            ["feature request", "enhancement", "feat"],
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct MetricsConfig {
    pub labels: LabelConfig,
    pub denylists: Denylists,
}

/// One developer-month. Row `month` covers (month-1, month] in months since
/// first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub dev: DevId,
    pub month: u32,
    pub start: f64,
    pub stop: f64,
    /// Indexed by [`Covariate::index`]; `None` marks an absent org metric.
    pub x: [Option<f64>; N_COVARIATES],
    pub y: bool,
}

impl PanelRow {
    pub fn get(&self, c: Covariate) -> Option<f64> {
        self.x[c.index()]
    }
}

/// Covariates for `dev` in month `month` (1-based) of a panel anchored at
/// `first_appearance`.
pub fn covariates_at(
    index: &ActivityIndex,
    dev: &DevId,
    first_appearance: Timestamp,
    month: u32,
) -> [Option<f64>; N_COVARIATES] {
    let cutoff = add_months(first_appearance, month - 1);
    let month_end = add_months(first_appearance, month);
    let n = |c: Counter| Some(index.count(dev, c, cutoff) as f64);
    let org = index.org_scoped(dev, cutoff);
    let prev_month = cutoff - chrono::Duration::days(1);
    let age = index.project_start().map_or(0.0, |s| years_between(s, cutoff).max(0.0));

    let mut x = [None; N_COVARIATES];
    for c in Covariate::ALL {
        x[c.index()] = match c {
            Covariate::PrOpen => n(Counter::PrOpen),
            Covariate::PrReview => n(Counter::PrReview),
            Covariate::Commit => n(Counter::Commit),
            Covariate::DaysActive => n(Counter::DaysActive),
            Covariate::IssueOpen => n(Counter::IssueOpen),
            Covariate::IssueTriage => n(Counter::IssueTriage),
            Covariate::AllComment => Some(index.all_comments(dev, cutoff) as f64),
            Covariate::Communicator => n(Counter::Communicator),
            Covariate::FromCompany => Some(f64::from(u8::from(index.affiliation(dev, month_end).is_company()))),
            Covariate::IssueOrg => org.map(|o| o.issue as f64),
            Covariate::IssueCommentOrg => org.map(|o| o.issue_comment as f64),
            Covariate::CommitOrg => org.map(|o| o.commit as f64),
            Covariate::CommitCommentOrg => org.map(|o| o.commit_comment as f64),
            Covariate::CommentNewcomer => n(Counter::CommentNewcomer),
            Covariate::FileModified => n(Counter::FileModified),
            Covariate::IssueNewFeature => n(Counter::IssueNewFeature),
            Covariate::MergeRatio => Some(index.merge_ratio(dev, cutoff)),
            Covariate::CommentOffensive => n(Counter::CommentOffensive),
            Covariate::Developer => Some(index.active_developers(prev_month) as f64),
            Covariate::Age => Some(age),
        };
    }
    x
}

/// One row per candidate per calendar month, from the first-appearance
/// month through the immigration (or collection) month.
pub fn build_panel(
    index: &ActivityIndex,
    pool: &CandidatePool,
    immigrations: &[ImmigrationEvent],
    collection_date: Timestamp,
) -> Result<Vec<PanelRow>, MetricsError> {
    let mut rows = Vec::new();
    for im in immigrations {
        if !pool.candidates.contains(&im.dev) {
            return Err(MetricsError::NotACandidate { dev: im.dev.clone() });
        }
        if im.first_appearance > collection_date {
            return Err(MetricsError::NoMonths { dev: im.dev.clone() });
        }
        let end = im.immigration_time.unwrap_or(collection_date);
        let span = month_index(im.first_appearance, end) + 1;
        if span < 1 {
            return Err(MetricsError::NoMonths { dev: im.dev.clone() });
        }
        for month in 1..=span as u32 {
            rows.push(PanelRow {
                dev: im.dev.clone(),
                month,
                start: f64::from(month - 1),
                stop: f64::from(month),
                x: covariates_at(index, &im.dev, im.first_appearance, month),
                y: month == span as u32 && !im.censored(),
            });
        }
    }
    Ok(rows)
}

pub fn panel_header() -> Vec<&'static str> {
    let mut h = vec!["dev", "month"];
    h.extend(Covariate::ALL.iter().map(|c| c.name()));
    h.extend(["start", "stop", "y"]);
    h
}

pub fn write_panel_csv(rows: &[PanelRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(panel_header()).expect("in-memory csv write");
    for r in rows {
        let mut rec = vec![r.dev.to_string(), r.month.to_string()];
        rec.extend(r.x.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
        rec.extend([r.start.to_string(), r.stop.to_string(), u8::from(r.y).to_string()]);
        w.write_record(rec).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn read_panel_csv(text: &str) -> Result<Vec<PanelRow>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != panel_header() {
        return Err(MetricsError::Parse { line: 1, reason: "unexpected header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| MetricsError::Parse { line, reason: format!("bad {what}") };
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| bad(panel_header()[j]));
        let mut x = [None; N_COVARIATES];
        for (k, slot) in x.iter_mut().enumerate() {
            let field = &rec[2 + k];
            *slot = if field.is_empty() { None } else { Some(num(2 + k)?) };
        }
        let base = 2 + N_COVARIATES;
        rows.push(PanelRow {
            dev: DevId(rec[0].to_string()),
            month: rec[1].parse().map_err(|_| bad("month"))?,
            x,
            start: num(base)?,
            stop: num(base + 1)?,
            y: match &rec[base + 2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("y")),
            },
        });
    }
    Ok(rows)
}

/// Covariates too sparse or constant to estimate, with the reason.
/// Columns absent on any row are reported as absent.
pub fn sparse_covariates(rows: &[PanelRow]) -> Vec<(Covariate, String)> {
    let mut out = Vec::new();
    for c in Covariate::ALL {
        let vals: Option<Vec<f64>> = rows.iter().map(|r| r.get(c)).collect();
        let Some(vals) = vals else {
            out.push((c, "absent (no sibling repositories)".to_string()));
            continue;
        };
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n.max(1.0);
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1.0);
        let nonzero = vals.iter().filter(|v| **v != 0.0).count();
        if var < 1e-10 {
            out.push((c, format!("near-zero variance ({var:.3e})")));
        } else if nonzero < 5 {
            out.push((c, format!("sparse ({nonzero} nonzero entries)")));
        }
    }
    out
}

#[cfg(test)]
mod tests;
