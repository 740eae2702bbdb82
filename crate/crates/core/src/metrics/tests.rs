use super::*;
use crate::calendar::shift_months;
use crate::identity::{resolve_identities, IdentityMap, ResolveOptions};
use crate::ingest::{
    issue_thread, normalize, CommitRecord, Event, EventKind, EventStream, NormalizeOptions, RawIdentity, RepoId,
};
use crate::lifecycle::{detect_immigrations, LifecycleConfig};
use crate::synthetic::{person, random_stream};
use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

fn t(m: u32, d: u32) -> Timestamp {
    Utc.with_ymd_and_hms(2021, m, d, 12, 0, 0).unwrap()
}

fn repo() -> RepoId {
    RepoId::new("acme", "widget")
}

fn commit(n: u32, author: &RawIdentity, committer: &RawIdentity, at: Timestamp, files: &[&str]) -> CommitRecord {
    CommitRecord {
        hash: format!("{n:040x}"),
        author_name: author.name.clone().unwrap(),
        author_email: author.email.clone().unwrap(),
        author_time: at,
        committer_name: committer.name.clone().unwrap(),
        committer_email: committer.email.clone().unwrap(),
        committer_time: at,
        repo: repo(),
        files_touched: files.iter().map(|f| f.to_string()).collect(),
        message: String::new(),
    }
}

fn ev(kind: EventKind, who: &RawIdentity, at: Timestamp, n: u64) -> Event {
    Event::new(kind, who.clone(), at, repo(), issue_thread(&repo(), n))
}

fn index(stream: &EventStream, siblings: Option<&EventStream>) -> (ActivityIndex, IdentityMap) {
    let all = match siblings {
        Some(s) => EventStream::merge([stream.clone(), s.clone()]),
        None => stream.clone(),
    };
    let ids = resolve_identities(&all, &ResolveOptions::default());
    let idx = ActivityIndex::build(stream, siblings, &ids, &MetricsConfig::default(), &LexiconScorer::default());
    (idx, ids)
}

fn stream(commits: Vec<CommitRecord>, events: Vec<Event>) -> EventStream {
    normalize(commits, events, &NormalizeOptions::default())
}

fn id(ids: &IdentityMap, who: &RawIdentity) -> DevId {
    ids.dev_of(who).unwrap().clone()
}

#[test]
fn communicators_rule() {
    let (a, b, c) = (person(0), person(1), person(2));
    let s = stream(
        vec![],
        vec![
            ev(EventKind::IssueComment, &a, t(1, 2), 1),
            ev(EventKind::IssueComment, &b, t(1, 3), 1),
            ev(EventKind::IssueComment, &c, t(1, 4), 3),
        ],
    );
    let (idx, ids) = index(&s, None);
    let before = t(6, 1);
    assert_eq!(idx.communicators(&id(&ids, &a), before), 1);
    assert_eq!(idx.communicators(&id(&ids, &b), before), 1);
    assert_eq!(idx.communicators(&id(&ids, &c), before), 0);
    // both comments must precede the cutoff
    assert_eq!(idx.communicators(&id(&ids, &a), t(1, 3)), 0);
}

#[test]
fn newcomer_comments_respect_label_time() {
    let (a, b) = (person(0), person(1));
    let s = stream(
        vec![],
        vec![
            ev(EventKind::IssueOpened, &b, t(1, 1), 1),
            ev(EventKind::IssueComment, &a, t(1, 2), 1),
            ev(EventKind::IssueLabeled, &b, t(1, 5), 1).with_labels(["Good First Issue"]),
            ev(EventKind::IssueComment, &a, t(1, 6), 1),
            ev(EventKind::IssueOpened, &b, t(1, 1), 3).with_labels(["help wanted"]),
            ev(EventKind::IssueComment, &a, t(1, 7), 3),
        ],
    );
    let (idx, ids) = index(&s, None);
    assert_eq!(idx.newcomer_comments(&id(&ids, &a), t(2, 1)), 2);
}

#[test]
fn feature_issue_labels_are_configurable() {
    let a = person(0);
    let s = stream(
        vec![],
        vec![
            ev(EventKind::IssueOpened, &a, t(1, 1), 1).with_labels(["enhancement"]),
            ev(EventKind::IssueOpened, &a, t(1, 2), 3),
            ev(EventKind::IssueOpened, &a, t(1, 3), 5).with_labels(["proposal"]),
        ],
    );
    let ids = resolve_identities(&s, &ResolveOptions::default());
    let default = ActivityIndex::build(&s, None, &ids, &MetricsConfig::default(), &LexiconScorer::default());
    assert_eq!(default.new_feature_issues(&id(&ids, &a), t(2, 1)), 1);
    let cfg = MetricsConfig { labels: LabelConfig::new(["gfi"], ["proposal"]), ..Default::default() };
    let custom = ActivityIndex::build(&s, None, &ids, &cfg, &LexiconScorer::default());
    assert_eq!(custom.new_feature_issues(&id(&ids, &a), t(2, 1)), 1);
    assert_eq!(custom.new_feature_issues(&id(&ids, &a), t(1, 3)), 0);
}

#[test]
fn merge_ratio_cases() {
    let (a, m) = (person(0), person(1));
    let mut events = Vec::new();
    for n in 1..=4u64 {
        events.push(ev(EventKind::PrOpened, &a, t(1, n as u32), n * 2).with_opener(a.clone()));
    }
    events.push(ev(EventKind::PrMerged, &m, t(1, 10), 2).with_opener(a.clone()));
    events.push(ev(EventKind::PrMerged, &m, t(1, 11), 4).with_opener(a.clone()));
    for n in 10..15u64 {
        events.push(ev(EventKind::PrOpened, &m, t(2, 1), n * 2).with_opener(m.clone()));
        events.push(ev(EventKind::PrMerged, &a, t(2, 2), n * 2).with_opener(m.clone()));
    }
    let (idx, ids) = index(&stream(vec![], events), None);
    assert_eq!(idx.merge_ratio(&id(&ids, &a), t(3, 1)), 0.5);
    assert_eq!(idx.merge_ratio(&id(&ids, &a), t(1, 1)), 0.0);
    assert_eq!(idx.merge_ratio(&id(&ids, &m), t(3, 1)), 1.0);
}

#[test]
fn org_scoped_counts() {
    let a = person(0);
    let focal = stream(vec![commit(1, &a, &a, t(1, 1), &[])], vec![]);
    let mut sib_commit = commit(2, &a, &a, t(1, 5), &[]);
    sib_commit.repo = RepoId::new("acme", "gadget");
    let mut foreign = ev(EventKind::IssueOpened, &a, t(1, 6), 1);
    foreign.repo = RepoId::new("other", "thing");
    let mut sib_issue = ev(EventKind::IssueOpened, &a, t(1, 7), 1);
    sib_issue.repo = RepoId::new("acme", "gadget");
    let mut sib_comment = ev(EventKind::IssueComment, &a, t(1, 8), 1);
    sib_comment.repo = RepoId::new("acme", "gadget");
    let siblings = stream(vec![sib_commit], vec![foreign, sib_issue, sib_comment]);

    let (idx, ids) = index(&focal, Some(&siblings));
    let counts = idx.org_scoped(&id(&ids, &a), t(2, 1)).unwrap();
    assert_eq!(counts, OrgCounts { issue: 1, issue_comment: 1, commit: 1, commit_comment: 0 });

    let (no_org, ids) = index(&focal, None);
    assert_eq!(no_org.org_scoped(&id(&ids, &a), t(2, 1)), None);
}

#[test]
fn triage_counts_distinct_foreign_issues() {
    let (a, b) = (person(0), person(1));
    let s = stream(
        vec![],
        vec![
            ev(EventKind::IssueOpened, &b, t(1, 1), 1),
            ev(EventKind::IssueLabeled, &a, t(1, 2), 1).with_labels(["bug"]),
            ev(EventKind::IssueAssigned, &a, t(1, 3), 1),
            ev(EventKind::IssueClosed, &a, t(1, 4), 1),
            ev(EventKind::IssueOpened, &a, t(1, 1), 3),
            ev(EventKind::IssueClosed, &a, t(1, 5), 3),
        ],
    );
    let (idx, ids) = index(&s, None);
    assert_eq!(idx.issue_triage(&id(&ids, &a), t(2, 1)), 1);
}

#[test]
fn label_config_parsing() {
    let cfg = LabelConfig::parse("# labels\nnewcomer_labels = Starter, easy\n").unwrap();
    assert_eq!(cfg.newcomer, BTreeSet::from(["starter".to_string(), "easy".to_string()]));
    assert_eq!(cfg.feature, LabelConfig::default().feature);
    assert!(LabelConfig::parse("colour = red").is_err());
}

// Brute-force oracles: every metric recomputed from raw events.

struct Oracle<'a> {
    events: Vec<&'a Event>,
    ids: &'a IdentityMap,
    labels: LabelConfig,
}

impl<'a> Oracle<'a> {
    fn dev(&self, e: &Event) -> Option<DevId> {
        self.ids.dev_of(&e.actor).cloned()
    }

    fn by(&self, dev: &DevId, before: Timestamp) -> Vec<&'a Event> {
        self.events.iter().copied().filter(|e| e.time < before && self.dev(e).as_ref() == Some(dev)).collect()
    }

    fn opener(&self, thread: &str) -> Option<DevId> {
        self.events
            .iter()
            .find(|e| e.thread_id == thread && matches!(e.kind, EventKind::IssueOpened | EventKind::PrOpened))
            .and_then(|e| self.dev(e))
    }

    fn has_label_at(&self, thread: &str, set: &BTreeSet<String>, at: Timestamp) -> bool {
        self.events.iter().any(|e| {
            e.thread_id == thread
                && e.time <= at
                && matches!(e.kind, EventKind::IssueOpened | EventKind::IssueLabeled)
                && e.labels.iter().any(|l| set.contains(&l.to_lowercase()))
        })
    }

    fn communicators(&self, dev: &DevId, before: Timestamp) -> usize {
        if self.ids.is_bot(dev) {
            return 0;
        }
        let commented = |d: &DevId| -> BTreeSet<&str> {
            self.by(d, before).iter().filter(|e| e.kind.is_comment()).map(|e| e.thread_id.as_str()).collect()
        };
        let mine = commented(dev);
        let others: BTreeSet<DevId> = self
            .events
            .iter()
            .filter_map(|e| self.dev(e))
            .filter(|d| d != dev && !self.ids.is_bot(d))
            .collect();
        others.iter().filter(|o| !commented(o).is_disjoint(&mine)).count()
    }

    fn days(&self, dev: &DevId, before: Timestamp) -> usize {
        self.by(dev, before).iter().map(|e| e.time.date_naive()).collect::<BTreeSet<_>>().len()
    }

    fn files(&self, dev: &DevId, before: Timestamp) -> usize {
        self.by(dev, before)
            .iter()
            .filter_map(|e| e.commit.as_ref())
            .flat_map(|c| c.files_touched.iter())
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn triage(&self, dev: &DevId, before: Timestamp) -> usize {
        self.by(dev, before)
            .iter()
            .filter(|e| e.kind.is_triage() && self.opener(&e.thread_id).as_ref() != Some(dev))
            .map(|e| e.thread_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn reviews(&self, dev: &DevId, before: Timestamp) -> usize {
        self.by(dev, before)
            .iter()
            .filter(|e| e.kind == EventKind::PrReview && self.opener(&e.thread_id).as_ref() != Some(dev))
            .map(|e| e.thread_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn newcomer(&self, dev: &DevId, before: Timestamp) -> usize {
        self.by(dev, before)
            .iter()
            .filter(|e| e.kind == EventKind::IssueComment && self.has_label_at(&e.thread_id, &self.labels.newcomer, e.time))
            .count()
    }

    fn features(&self, dev: &DevId, before: Timestamp) -> usize {
        self.by(dev, before)
            .iter()
            .filter(|e| e.kind == EventKind::IssueOpened && self.has_label_at(&e.thread_id, &self.labels.feature, before - Duration::nanoseconds(1)))
            .count()
    }

    fn kind(&self, dev: &DevId, before: Timestamp, kinds: &[EventKind]) -> usize {
        self.by(dev, before).iter().filter(|e| kinds.contains(&e.kind)).count()
    }

    fn merge_ratio(&self, dev: &DevId, before: Timestamp) -> f64 {
        let opened: Vec<&str> = self
            .by(dev, before)
            .iter()
            .filter(|e| e.kind == EventKind::PrOpened)
            .map(|e| e.thread_id.as_str())
            .collect();
        if opened.is_empty() {
            return 0.0;
        }
        let merged = opened
            .iter()
            .filter(|th| self.events.iter().any(|e| e.kind == EventKind::PrMerged && e.thread_id == **th && e.time < before))
            .count();
        merged as f64 / opened.len() as f64
    }
}

#[test]
fn index_matches_brute_force_on_random_streams() {
    for seed in 0..12 {
        let s = random_stream(seed, 200, 6, 10);
        let (idx, ids) = index(&s, None);
        let oracle = Oracle { events: s.iter().collect(), ids: &ids, labels: LabelConfig::default() };
        let scorer = LexiconScorer::default();
        for dev in ids.devs().map(|d| d.id.clone()) {
            for month in [2, 4, 7, 11] {
                let c = t(month, 1);
                let ctx = format!("seed {seed} dev {dev} month {month}");
                assert_eq!(idx.communicators(&dev, c), oracle.communicators(&dev, c), "M8 {ctx}");
                assert_eq!(idx.count(&dev, Counter::DaysActive, c), oracle.days(&dev, c), "M4 {ctx}");
                assert_eq!(idx.count(&dev, Counter::FileModified, c), oracle.files(&dev, c), "M15 {ctx}");
                assert_eq!(idx.issue_triage(&dev, c), oracle.triage(&dev, c), "M6 {ctx}");
                assert_eq!(idx.count(&dev, Counter::PrReview, c), oracle.reviews(&dev, c), "M2 {ctx}");
                assert_eq!(idx.newcomer_comments(&dev, c), oracle.newcomer(&dev, c), "M14 {ctx}");
                assert_eq!(idx.new_feature_issues(&dev, c), oracle.features(&dev, c), "M16 {ctx}");
                assert_eq!(idx.merge_ratio(&dev, c), oracle.merge_ratio(&dev, c), "M17 {ctx}");
                assert_eq!(
                    idx.all_comments(&dev, c),
                    oracle.kind(&dev, c, &[EventKind::IssueComment, EventKind::PrComment, EventKind::CommitComment]),
                    "M7 {ctx}"
                );
                let offensive = score_offensive(
                    oracle.by(&dev, c).iter().filter(|e| e.kind.is_comment()).map(|e| e.body.as_str()),
                    &scorer,
                );
                assert_eq!(idx.count(&dev, Counter::CommentOffensive, c), offensive, "M18 {ctx}");
            }
        }
    }
}

#[test]
fn from_company_uses_emails_up_to_month_end() {
    let a = RawIdentity::git("Ann", "ann@hashicorp.com");
    let m = RawIdentity::git("Maint", "m@acme.io");
    let s = stream(
        vec![commit(1, &m, &m, t(1, 1), &[]), commit(3, &a, &m, t(2, 10), &[])],
        vec![ev(EventKind::IssueComment, &a, t(1, 10), 1)],
    );
    let (idx, ids) = index(&s, None);
    let dev = id(&ids, &a);
    let x1 = covariates_at(&idx, &dev, t(1, 10), 1);
    let x2 = covariates_at(&idx, &dev, t(1, 10), 2);
    assert_eq!(x1[Covariate::FromCompany.index()], Some(0.0));
    assert_eq!(x2[Covariate::FromCompany.index()], Some(1.0));
}

fn candidate_fixture() -> (EventStream, IdentityMap) {
    let (m, d) = (RawIdentity::git("Maint", "m@acme.io"), RawIdentity::git("Dev", "dev@gmail.com"));
    let s = stream(
        vec![
            commit(1, &m, &m, t(1, 1), &["a"]),
            commit(2, &d, &m, t(1, 5), &["a", "b"]),
            commit(3, &d, &m, t(1, 20), &["c"]),
            commit(4, &d, &m, t(2, 14), &[]),
            commit(5, &d, &d, t(3, 9), &[]),
        ],
        vec![],
    );
    let ids = resolve_identities(&s, &ResolveOptions::default());
    (s, ids)
}

#[test]
fn three_month_candidate_panel() {
    let (s, ids) = candidate_fixture();
    let (imm, pool) = detect_immigrations(&s, &ids, &[], t(12, 1), &LifecycleConfig::default()).unwrap();
    let idx = ActivityIndex::build(&s, None, &ids, &MetricsConfig::default(), &LexiconScorer::default());
    let rows = build_panel(&idx, &pool, &imm, t(12, 1)).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.y).collect::<Vec<_>>(), vec![false, false, true]);
    assert_eq!(rows.iter().map(|r| (r.start, r.stop)).collect::<Vec<_>>(), vec![(0., 1.), (1., 2.), (2., 3.)]);
    let commits: Vec<_> = rows.iter().map(|r| r.get(Covariate::Commit).unwrap()).collect();
    assert_eq!(commits, vec![0.0, 2.0, 3.0]);
    assert_eq!(rows[1].get(Covariate::FileModified), Some(3.0));
    assert_eq!(rows[0].get(Covariate::IssueOrg), None);
    // the maintainer was the only active developer in January
    assert_eq!(rows[1].get(Covariate::Developer), Some(2.0));

    let late = vec![crate::lifecycle::ImmigrationEvent {
        first_appearance: t(12, 5),
        ..imm[0].clone()
    }];
    assert!(matches!(build_panel(&idx, &pool, &late, t(12, 1)), Err(MetricsError::NoMonths { .. })));
}

#[test]
fn panel_csv_round_trip() {
    let (s, ids) = candidate_fixture();
    let (imm, pool) = detect_immigrations(&s, &ids, &[], t(12, 1), &LifecycleConfig::default()).unwrap();
    let idx = ActivityIndex::build(&s, None, &ids, &MetricsConfig::default(), &LexiconScorer::default());
    let rows = build_panel(&idx, &pool, &imm, t(12, 1)).unwrap();
    let text = write_panel_csv(&rows);
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("dev,month,pr_open,pr_review,commit,"));
    assert!(first.ends_with(",comment_offensive,developer,age,start,stop,y"));
    assert!(text.lines().nth(1).unwrap().contains(",,,,"), "absent org metrics are empty fields");
    assert_eq!(read_panel_csv(&text).unwrap(), rows);
}

#[test]
fn sparse_columns_reported() {
    let (s, ids) = candidate_fixture();
    let (imm, pool) = detect_immigrations(&s, &ids, &[], t(12, 1), &LifecycleConfig::default()).unwrap();
    let idx = ActivityIndex::build(&s, None, &ids, &MetricsConfig::default(), &LexiconScorer::default());
    let rows = build_panel(&idx, &pool, &imm, t(12, 1)).unwrap();
    let dropped: BTreeMap<_, _> = sparse_covariates(&rows).into_iter().collect();
    assert!(dropped[&Covariate::IssueOrg].starts_with("absent"));
    assert!(dropped[&Covariate::PrOpen].starts_with("near-zero"));
    assert!(dropped[&Covariate::Commit].starts_with("sparse"));
}

fn panel_for(s: &EventStream) -> Vec<PanelRow> {
    let ids = resolve_identities(s, &ResolveOptions::default());
    let collect = t(12, 28);
    let (imm, pool) = detect_immigrations(s, &ids, &[], collect, &LifecycleConfig::default()).unwrap();
    let idx = ActivityIndex::build(s, None, &ids, &MetricsConfig::default(), &LexiconScorer::default());
    build_panel(&idx, &pool, &imm, collect).unwrap()
}

fn check_panel_invariants(rows: &[PanelRow]) -> Result<(), TestCaseError> {
    let mut by_dev: BTreeMap<&DevId, Vec<&PanelRow>> = BTreeMap::new();
    for r in rows {
        by_dev.entry(&r.dev).or_default().push(r);
    }
    for rs in by_dev.values() {
        for (k, r) in rs.iter().enumerate() {
            prop_assert!(r.start < r.stop);
            prop_assert_eq!(r.start, k as f64);
            prop_assert_eq!(r.month as usize, k + 1);
            prop_assert!(!r.y || k + 1 == rs.len());
            let m = r.get(Covariate::MergeRatio).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
        }
        for w in rs.windows(2) {
            for c in Covariate::ALL.into_iter().filter(|c| c.is_cumulative() && !c.is_org_scoped()) {
                prop_assert!(w[1].get(c).unwrap() >= w[0].get(c).unwrap(), "{} decreased", c);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn panel_invariants_hold(seed in 0u64..10_000) {
        let rows = panel_for(&random_stream(seed, 150, 7, 11));
        check_panel_invariants(&rows)?;
    }

    #[test]
    fn metrics_are_leak_free_under_a_month_shift(seed in 0u64..10_000) {
        let s = random_stream(seed, 120, 5, 10);
        let shifted = EventStream::merge([s.filter(|_| true)]).into_events().into_iter().map(|mut e| {
            e.time = shift_months(e.time, 1);
            if let Some(c) = e.commit.as_mut() {
                c.author_time = shift_months(c.author_time, 1);
                c.committer_time = shift_months(c.committer_time, 1);
            }
            e
        }).collect::<Vec<_>>();
        let shifted = normalize(vec![], shifted, &NormalizeOptions::default());
        let ids = resolve_identities(&s, &ResolveOptions::default());
        let cfg = MetricsConfig::default();
        let a = ActivityIndex::build(&s, None, &ids, &cfg, &LexiconScorer::default());
        let b = ActivityIndex::build(&shifted, None, &ids, &cfg, &LexiconScorer::default());
        let anchor = crate::synthetic::epoch();
        for dev in ids.devs().map(|d| d.id.clone()) {
            for month in 1..12u32 {
                let before = covariates_at(&a, &dev, anchor, month);
                let after = covariates_at(&b, &dev, anchor, month + 1);
                for c in Covariate::ALL.into_iter().filter(|c| *c != Covariate::Age) {
                    prop_assert_eq!(before[c.index()], after[c.index()], "{} month {}", c, month);
                }
            }
        }
    }
}
