//! Per-developer increment times for every cumulative metric.
//!
//! Each counter stores the sorted instants at which it went up by one, so a
//! cumulative value "strictly before t" is a binary search.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;

use super::offensive::{score_one, OffensiveScorer};
use super::MetricsConfig;
use crate::identity::{affiliation_from_emails, Affiliation, DevId, IdentityMap};
use crate::ingest::{EventKind, EventStream, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Counter {
    PrOpen,
    PrMerged,
    PrReview,
    Commit,
    DaysActive,
    IssueOpen,
    IssueTriage,
    PrComment,
    IssueComment,
    CommitComment,
    Communicator,
    IssueOrg,
    IssueCommentOrg,
    CommitOrg,
    CommitCommentOrg,
    CommentNewcomer,
    FileModified,
    IssueNewFeature,
    CommentOffensive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OrgCounts {
    pub issue: usize,
    pub issue_comment: usize,
    pub commit: usize,
    pub commit_comment: usize,
}

pub(crate) fn month_key(t: Timestamp) -> i64 {
    t.year() as i64 * 12 + t.month0() as i64
}

#[derive(Debug, Clone, Default)]
pub struct ActivityIndex {
    series: BTreeMap<(DevId, Counter), Vec<Timestamp>>,
    has_org: bool,
    /// Distinct non-bot developers with activity, by calendar month.
    active_by_month: BTreeMap<i64, usize>,
    project_start: Option<Timestamp>,
    /// (author time, author email) of each authored commit.
    authored_emails: BTreeMap<DevId, Vec<(Timestamp, String)>>,
    forced: BTreeMap<DevId, Affiliation>,
    denylists: crate::identity::Denylists,
}

fn first_time<K: Ord>(map: &mut BTreeMap<K, Timestamp>, key: K, t: Timestamp) {
    map.entry(key).and_modify(|v| *v = (*v).min(t)).or_insert(t);
}

fn norm_label(l: &str) -> String {
    l.trim().to_lowercase()
}

impl ActivityIndex {
    /// `siblings` holds events from the organization's other repositories;
    /// events in a focal repository or outside the focal organizations are
    /// ignored. Out-of-window events are skipped throughout.
    pub fn build(
        stream: &EventStream,
        siblings: Option<&EventStream>,
        ids: &IdentityMap,
        cfg: &MetricsConfig,
        scorer: &dyn OffensiveScorer,
    ) -> Self {
        let mut idx = ActivityIndex {
            has_org: siblings.is_some(),
            denylists: cfg.denylists.clone(),
            ..Default::default()
        };
        let events: Vec<_> = stream.iter().filter(|e| !e.out_of_window).collect();
        let dev_of = |e: &crate::ingest::Event| ids.dev_of(&e.actor).cloned();

        // Thread openers and label timelines come first; comments need both.
        let mut opener: BTreeMap<&str, DevId> = BTreeMap::new();
        let mut label_times: BTreeMap<&str, BTreeMap<String, Timestamp>> = BTreeMap::new();
        for e in &events {
            let from_event = matches!(e.kind, EventKind::IssueOpened | EventKind::PrOpened)
                .then(|| dev_of(e))
                .flatten();
            if let Some(d) = from_event.or_else(|| e.opener.as_ref().and_then(|o| ids.dev_of(o).cloned())) {
                if matches!(e.kind, EventKind::IssueOpened | EventKind::PrOpened) || !opener.contains_key(e.thread_id.as_str()) {
                    opener.insert(&e.thread_id, d);
                }
            }
            if matches!(e.kind, EventKind::IssueOpened | EventKind::IssueLabeled) {
                let labels = label_times.entry(&e.thread_id).or_default();
                for l in &e.labels {
                    first_time(labels, norm_label(l), e.time);
                }
            }
        }
        let first_label_in = |thread: &str, set: &BTreeSet<String>| -> Option<Timestamp> {
            label_times.get(thread)?.iter().filter(|(l, _)| set.contains(*l)).map(|(_, t)| *t).min()
        };

        let push = |series: &mut BTreeMap<(DevId, Counter), Vec<Timestamp>>, d: &DevId, c: Counter, t: Timestamp| {
            series.entry((d.clone(), c)).or_default().push(t);
        };
        let mut firsts: BTreeMap<(DevId, Counter, String), Timestamp> = BTreeMap::new();
        let mut commenters: BTreeMap<&str, BTreeMap<DevId, Timestamp>> = BTreeMap::new();
        let mut active: BTreeMap<i64, BTreeSet<DevId>> = BTreeMap::new();

        for e in &events {
            idx.project_start = Some(idx.project_start.map_or(e.time, |s| s.min(e.time)));
            let Some(dev) = dev_of(e) else { continue };
            let bot = e.bot || ids.is_bot(&dev);
            if !bot {
                active.entry(month_key(e.time)).or_default().insert(dev.clone());
            }
            first_time(&mut firsts, (dev.clone(), Counter::DaysActive, e.time.date_naive().to_string()), e.time);
            let opened_by_dev = opener.get(e.thread_id.as_str()) == Some(&dev);
            match e.kind {
                EventKind::Commit => {
                    push(&mut idx.series, &dev, Counter::Commit, e.time);
                    if let Some(c) = &e.commit {
                        idx.authored_emails.entry(dev.clone()).or_default().push((e.time, c.author_email.clone()));
                        for f in &c.files_touched {
                            first_time(&mut firsts, (dev.clone(), Counter::FileModified, f.clone()), e.time);
                        }
                    }
                }
                EventKind::PrOpened => push(&mut idx.series, &dev, Counter::PrOpen, e.time),
                EventKind::PrMerged => {
                    if let Some(author) = opener.get(e.thread_id.as_str()) {
                        push(&mut idx.series, author, Counter::PrMerged, e.time);
                    }
                }
                EventKind::PrReview if !opened_by_dev => {
                    first_time(&mut firsts, (dev.clone(), Counter::PrReview, e.thread_id.clone()), e.time);
                }
                EventKind::IssueOpened => {
                    push(&mut idx.series, &dev, Counter::IssueOpen, e.time);
                    if let Some(fl) = first_label_in(&e.thread_id, &cfg.labels.feature) {
                        push(&mut idx.series, &dev, Counter::IssueNewFeature, fl.max(e.time));
                    }
                }
                k if k.is_triage() && !opened_by_dev => {
                    first_time(&mut firsts, (dev.clone(), Counter::IssueTriage, e.thread_id.clone()), e.time);
                }
                k if k.is_comment() => {
                    let counter = match k {
                        EventKind::PrComment => Counter::PrComment,
                        EventKind::IssueComment => Counter::IssueComment,
                        _ => Counter::CommitComment,
                    };
                    push(&mut idx.series, &dev, counter, e.time);
                    if k == EventKind::IssueComment
                        && first_label_in(&e.thread_id, &cfg.labels.newcomer).is_some_and(|t| t <= e.time)
                    {
                        push(&mut idx.series, &dev, Counter::CommentNewcomer, e.time);
                    }
                    if score_one(&e.body, scorer) {
                        push(&mut idx.series, &dev, Counter::CommentOffensive, e.time);
                    }
                    if !bot {
                        first_time(commenters.entry(&e.thread_id).or_default(), dev.clone(), e.time);
                    }
                }
                _ => {}
            }
        }

        // Two commenters on a thread become communicators once both have
        // commented; the earliest such thread counts.
        let mut pairs: BTreeMap<(DevId, DevId), Timestamp> = BTreeMap::new();
        for members in commenters.values() {
            let m: Vec<_> = members.iter().collect();
            for (i, (a, ta)) in m.iter().enumerate() {
                for (b, tb) in &m[i + 1..] {
                    first_time(&mut pairs, ((*a).clone(), (*b).clone()), (**ta).max(**tb));
                }
            }
        }
        for ((a, b), t) in pairs {
            push(&mut idx.series, &a, Counter::Communicator, t);
            push(&mut idx.series, &b, Counter::Communicator, t);
        }
        for ((dev, counter, _), t) in firsts {
            push(&mut idx.series, &dev, counter, t);
        }

        if let Some(sib) = siblings {
            let focal: BTreeSet<_> = events.iter().map(|e| &e.repo).collect();
            let orgs: BTreeSet<_> = focal.iter().map(|r| r.org.as_str()).collect();
            let in_org = |e: &&crate::ingest::Event| orgs.contains(e.repo.org.as_str()) && !focal.contains(&e.repo);
            for e in sib.iter().filter(|e| !e.out_of_window).filter(in_org) {
                let Some(dev) = dev_of(e) else { continue };
                let counter = match e.kind {
                    EventKind::IssueOpened => Counter::IssueOrg,
                    EventKind::IssueComment => Counter::IssueCommentOrg,
                    EventKind::Commit => Counter::CommitOrg,
                    EventKind::CommitComment => Counter::CommitCommentOrg,
                    _ => continue,
                };
                push(&mut idx.series, &dev, counter, e.time);
            }
        }

        for v in idx.series.values_mut() {
            v.sort();
        }
        idx.active_by_month = active.into_iter().map(|(k, s)| (k, s.len())).collect();
        idx.forced = ids
            .devs()
            .filter_map(|d| ids.forced_affiliation(&d.id).map(|a| (d.id.clone(), a.clone())))
            .collect();
        idx
    }

    /// Increments of `counter` for `dev` strictly before `before`.
    pub fn count(&self, dev: &DevId, counter: Counter, before: Timestamp) -> usize {
        self.series
            .get(&(dev.clone(), counter))
            .map_or(0, |v| v.partition_point(|t| *t < before))
    }

    pub fn has_org_data(&self) -> bool {
        self.has_org
    }

    pub fn communicators(&self, dev: &DevId, before: Timestamp) -> usize {
        self.count(dev, Counter::Communicator, before)
    }

    pub fn newcomer_comments(&self, dev: &DevId, before: Timestamp) -> usize {
        self.count(dev, Counter::CommentNewcomer, before)
    }

    pub fn new_feature_issues(&self, dev: &DevId, before: Timestamp) -> usize {
        self.count(dev, Counter::IssueNewFeature, before)
    }

    pub fn issue_triage(&self, dev: &DevId, before: Timestamp) -> usize {
        self.count(dev, Counter::IssueTriage, before)
    }

    pub fn all_comments(&self, dev: &DevId, before: Timestamp) -> usize {
        [Counter::PrComment, Counter::IssueComment, Counter::CommitComment]
            .into_iter()
            .map(|c| self.count(dev, c, before))
            .sum()
    }

    /// Merged over opened, among PRs opened before the cutoff; 0 without PRs.
    pub fn merge_ratio(&self, dev: &DevId, before: Timestamp) -> f64 {
        let opened = self.count(dev, Counter::PrOpen, before);
        if opened == 0 {
            return 0.0;
        }
        (self.count(dev, Counter::PrMerged, before) as f64 / opened as f64).min(1.0)
    }

    /// None when no sibling repositories were configured.
    pub fn org_scoped(&self, dev: &DevId, before: Timestamp) -> Option<OrgCounts> {
        self.has_org.then(|| OrgCounts {
            issue: self.count(dev, Counter::IssueOrg, before),
            issue_comment: self.count(dev, Counter::IssueCommentOrg, before),
            commit: self.count(dev, Counter::CommitOrg, before),
            commit_comment: self.count(dev, Counter::CommitCommentOrg, before),
        })
    }

    /// Affiliation from the emails on commits authored strictly before `before`,
    /// unless an override pins it.
    pub fn affiliation(&self, dev: &DevId, before: Timestamp) -> Affiliation {
        if let Some(a) = self.forced.get(dev) {
            return a.clone();
        }
        let emails = self
            .authored_emails
            .get(dev)
            .into_iter()
            .flatten()
            .filter(|(t, _)| *t < before)
            .map(|(_, e)| e.as_str());
        affiliation_from_emails(emails, &self.denylists)
    }

    /// Distinct non-bot developers active in the calendar month of `t`.
    pub fn active_developers(&self, t: Timestamp) -> usize {
        self.active_by_month.get(&month_key(t)).copied().unwrap_or(0)
    }

    pub fn project_start(&self) -> Option<Timestamp> {
        self.project_start
    }
}
