//! Seeded generators for fixtures, examples, and simulation studies.

use chrono::{Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use std::path::{Path, PathBuf};

use crate::ingest::{
    commit_thread, issue_thread, normalize, write_git_log, CommitRecord, Event, EventKind, EventStream, NormalizeOptions,
    RawIdentity, RepoId, Timestamp,
};

const FILES: &[&str] = &["src/lib.rs", "src/net.rs", "src/fs.rs", "docs/guide.md", "README.md", "tests/io.rs"];
const LABELS: &[&str] = &["good first issue", "enhancement", "bug", "help wanted", "docs"];
const BODIES: &[&str] = &[
    "thanks, looks good",
    "can you add a test?",
    "this is stupid, revert it",
    "rebased on main",
    "LGTM",
    "what the hell is this, wtf",
];

pub fn epoch() -> Timestamp {
    Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()
}

pub fn maintainer() -> RawIdentity {
    RawIdentity::git("Maintainer", "maint@acme.io")
}

pub fn person(k: usize) -> RawIdentity {
    let email = match k % 3 {
        0 => format!("dev{k}@corp{}.com", k % 2),
        1 => format!("dev{k}@gmail.com"),
        _ => format!("dev{k}@uni.edu"),
    };
    RawIdentity::git(format!("Dev {k}"), email)
}

/// Random instant in the first `months` months from [`epoch`], on a day of
/// month no later than the 28th and at least an hour after midnight.
fn random_time(rng: &mut ChaCha8Rng, months: u32) -> Timestamp {
    let month = rng.random_range(0..months);
    let base = epoch().checked_add_months(chrono::Months::new(month)).unwrap();
    base + Duration::days(rng.random_range(0..28)) + Duration::seconds(rng.random_range(3_600..86_000))
}

/// A single-repository activity stream over `months` months with `people`
/// contributors, a maintainer who commits most work, and a bot commenter.
pub fn random_stream(seed: u64, n_events: usize, people: usize, months: u32) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let repo = RepoId::new("acme", "widget");
    let devs: Vec<RawIdentity> = (0..people).map(person).collect();
    let bot = RawIdentity::login("ci-helper[bot]");
    let n_threads = 12u64;

    let mut commits: Vec<CommitRecord> = Vec::new();
    let mut events: Vec<Event> = Vec::new();
    let mut merged = [false; 13];

    for _ in 0..n_events {
        let t = random_time(&mut rng, months);
        let actor = devs.choose(&mut rng).unwrap().clone();
        let roll = rng.random_range(0..10);
        if roll < 3 || (roll == 3 && commits.is_empty()) {
            let committer = if rng.random_bool(0.1) { actor.clone() } else { maintainer() };
            let files = FILES.iter().filter(|_| rng.random_bool(0.3)).map(|f| f.to_string()).collect();
            commits.push(CommitRecord {
                hash: format!("{:040x}", commits.len() + 1),
                author_name: actor.name.clone().unwrap(),
                author_email: actor.email.clone().unwrap(),
                author_time: t,
                committer_name: committer.name.clone().unwrap(),
                committer_email: committer.email.clone().unwrap(),
                committer_time: t,
                repo: repo.clone(),
                files_touched: files,
                message: String::new(),
            });
        } else if roll == 3 {
            let c = commits.choose(&mut rng).unwrap();
            let at = t.max(c.author_time + Duration::minutes(5));
            events.push(
                Event::new(EventKind::CommitComment, actor, at, repo.clone(), commit_thread(&repo, &c.hash))
                    .with_body(*BODIES.choose(&mut rng).unwrap()),
            );
        } else {
            let n = rng.random_range(1..=n_threads);
            let thread = issue_thread(&repo, n);
            let actor = if rng.random_bool(0.05) { bot.clone() } else { actor };
            let body = *BODIES.choose(&mut rng).unwrap();
            let ev = if n % 2 == 1 {
                match rng.random_range(0..7) {
                    0..=2 => Event::new(EventKind::IssueComment, actor, t, repo.clone(), thread).with_body(body),
                    3 => Event::new(EventKind::IssueLabeled, actor, t, repo.clone(), thread)
                        .with_labels([*LABELS.choose(&mut rng).unwrap()]),
                    4 => Event::new(EventKind::IssueAssigned, actor, t, repo.clone(), thread),
                    5 => Event::new(EventKind::IssueMilestoned, actor, t, repo.clone(), thread),
                    _ => Event::new(EventKind::IssueClosed, actor, t, repo.clone(), thread),
                }
            } else {
                match rng.random_range(0..6) {
                    0..=2 => Event::new(EventKind::PrComment, actor, t, repo.clone(), thread).with_body(body),
                    3 | 4 => Event::new(EventKind::PrReview, actor, t, repo.clone(), thread),
                    _ if !merged[n as usize] => {
                        merged[n as usize] = true;
                        Event::new(EventKind::PrMerged, maintainer(), t, repo.clone(), thread)
                    }
                    _ => Event::new(EventKind::PrComment, actor, t, repo.clone(), thread).with_body(body),
                }
            };
            events.push(ev);
        }
    }

    for n in 1..=n_threads {
        let thread = issue_thread(&repo, n);
        let Some(first) = events.iter().filter(|e| e.thread_id == thread).map(|e| e.time).min() else {
            continue;
        };
        let opener = devs.choose(&mut rng).unwrap().clone();
        let kind = if n % 2 == 1 { EventKind::IssueOpened } else { EventKind::PrOpened };
        let mut open = Event::new(kind, opener.clone(), first - Duration::minutes(1), repo.clone(), &thread);
        if kind == EventKind::IssueOpened && rng.random_bool(0.4) {
            open = open.with_labels([*LABELS.choose(&mut rng).unwrap()]);
        }
        for e in events.iter_mut().filter(|e| e.thread_id == thread) {
            e.opener = Some(opener.clone());
        }
        events.push(open.with_opener(opener));
    }

    normalize(commits, events, &NormalizeOptions::default())
}

/// Raw inputs for a focal repository and one sibling in the same org, as a
/// git log plus API events would deliver them.
#[derive(Debug, Clone, Default)]
pub struct CommunityFixture {
    pub focal_commits: Vec<CommitRecord>,
    pub focal_events: Vec<Event>,
    pub sibling_commits: Vec<CommitRecord>,
    pub sibling_events: Vec<Event>,
}

/// A community where newcomers arrive over time and earn commit rights at a
/// monthly hazard that grows with their merged pull requests. Immigrants
/// commit their own work from the month after promotion.
pub fn community(seed: u64, people: usize, months: u32) -> CommunityFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let focal = RepoId::new("acme", "widget");
    let sibling = RepoId::new("acme", "gadget");
    let mut out = CommunityFixture::default();
    let mut next_thread = 1u64;
    let mut issues: Vec<(String, RawIdentity)> = Vec::new();
    let mut prs: Vec<(String, RawIdentity)> = Vec::new();
    let mut hashes = 0usize;
    let mut commit = |repo: &RepoId, author: &RawIdentity, committer: &RawIdentity, t: Timestamp, rng: &mut ChaCha8Rng| {
        hashes += 1;
        CommitRecord {
            hash: format!("{hashes:040x}"),
            author_name: author.name.clone().unwrap(),
            author_email: author.email.clone().unwrap(),
            author_time: t,
            committer_name: committer.name.clone().unwrap(),
            committer_email: committer.email.clone().unwrap(),
            committer_time: t + Duration::minutes(30),
            repo: repo.clone(),
            files_touched: FILES.iter().filter(|_| rng.random_bool(0.3)).map(|f| f.to_string()).collect(),
            message: String::new(),
        }
    };

    // the maintainer founds the project in month 0
    let t0 = epoch() + Duration::hours(2);
    let m = maintainer();
    out.focal_commits.push(commit(&focal, &m, &m, t0, &mut rng));

    let arrival: Vec<u32> = (0..people).map(|_| rng.random_range(0..months.saturating_sub(3).max(1))).collect();
    let activity: Vec<f64> = (0..people).map(|_| (rng.random_range(-1.0f64..1.2)).exp()).collect();
    let mut promoted: Vec<Option<u32>> = vec![None; people];
    let mut merged = vec![0u32; people];

    for month in 0..months {
        for k in 0..people {
            if arrival[k] > month {
                continue;
            }
            let me = person(k);
            let n_actions = Exp::new(1.0 / activity[k]).unwrap().sample(&mut rng).round() as usize + usize::from(month == arrival[k]);
            for _ in 0..n_actions {
                let t = epoch().checked_add_months(chrono::Months::new(month)).unwrap()
                    + Duration::days(rng.random_range(0..27))
                    + Duration::seconds(rng.random_range(3_600..80_000));
                match rng.random_range(0..10) {
                    0 | 1 => {
                        let thread = issue_thread(&focal, next_thread);
                        next_thread += 1;
                        let labels: Vec<&str> = LABELS.iter().copied().filter(|_| rng.random_bool(0.2)).collect();
                        out.focal_events.push(
                            Event::new(EventKind::IssueOpened, me.clone(), t, focal.clone(), &thread)
                                .with_labels(labels)
                                .with_opener(me.clone()),
                        );
                        if rng.random_bool(0.5) {
                            out.focal_events.push(
                                Event::new(EventKind::IssueLabeled, m.clone(), t + Duration::hours(3), focal.clone(), &thread)
                                    .with_labels([*LABELS.choose(&mut rng).unwrap()])
                                    .with_opener(me.clone()),
                            );
                        }
                        issues.push((thread, me.clone()));
                    }
                    2 | 3 if !issues.is_empty() => {
                        let (thread, opener) = issues.choose(&mut rng).unwrap().clone();
                        out.focal_events.push(
                            Event::new(EventKind::IssueComment, me.clone(), t, focal.clone(), thread)
                                .with_body(*BODIES.choose(&mut rng).unwrap())
                                .with_opener(opener),
                        );
                    }
                    4 if !issues.is_empty() => {
                        let (thread, opener) = issues.choose(&mut rng).unwrap().clone();
                        let kind = *[EventKind::IssueAssigned, EventKind::IssueClosed, EventKind::IssueLabeled]
                            .choose(&mut rng)
                            .unwrap();
                        let mut ev = Event::new(kind, me.clone(), t, focal.clone(), thread).with_opener(opener);
                        if kind == EventKind::IssueLabeled {
                            ev = ev.with_labels([*LABELS.choose(&mut rng).unwrap()]);
                        }
                        out.focal_events.push(ev);
                    }
                    5 | 6 => {
                        let thread = issue_thread(&focal, next_thread);
                        next_thread += 1;
                        out.focal_events.push(
                            Event::new(EventKind::PrOpened, me.clone(), t, focal.clone(), &thread).with_opener(me.clone()),
                        );
                        let own = promoted[k].is_some_and(|p| p < month);
                        let committer = if own { me.clone() } else { m.clone() };
                        out.focal_commits.push(commit(&focal, &me, &committer, t + Duration::hours(1), &mut rng));
                        if rng.random_bool(0.6) {
                            merged[k] += 1;
                            out.focal_events.push(
                                Event::new(EventKind::PrMerged, committer, t + Duration::hours(2), focal.clone(), &thread)
                                    .with_opener(me.clone()),
                            );
                        }
                        prs.push((thread, me.clone()));
                    }
                    7 if !prs.is_empty() => {
                        let (thread, opener) = prs.choose(&mut rng).unwrap().clone();
                        let kind = if rng.random_bool(0.5) { EventKind::PrReview } else { EventKind::PrComment };
                        out.focal_events.push(
                            Event::new(kind, me.clone(), t, focal.clone(), thread)
                                .with_body(*BODIES.choose(&mut rng).unwrap())
                                .with_opener(opener),
                        );
                    }
                    _ => {
                        let thread = issue_thread(&sibling, next_thread);
                        next_thread += 1;
                        if rng.random_bool(0.5) {
                            out.sibling_commits.push(commit(&sibling, &me, &m, t, &mut rng));
                        } else {
                            out.sibling_events.push(
                                Event::new(EventKind::IssueOpened, me.clone(), t, sibling.clone(), thread)
                                    .with_opener(me.clone()),
                            );
                        }
                    }
                }
            }
            if promoted[k].is_none() && month > arrival[k] {
                let hazard = (-3.6 + 0.6 * f64::from(merged[k]).ln_1p()).exp();
                if rng.random_bool(1.0 - (-hazard).exp()) {
                    promoted[k] = Some(month);
                    let t = epoch().checked_add_months(chrono::Months::new(month)).unwrap()
                        + Duration::days(27)
                        + Duration::hours(rng.random_range(1..20));
                    out.focal_commits.push(commit(&focal, &me, &me, t, &mut rng));
                }
            }
        }
    }
    out
}

/// Writes a [`community`] as git logs, event files and a run configuration
/// into `dir`, and returns the configuration path. Outputs go to `dir/out`.
pub fn write_community_project(dir: &Path, seed: u64, people: usize, months: u32) -> std::io::Result<PathBuf> {
    let c = community(seed, people, months);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("widget.log"), write_git_log(&c.focal_commits))?;
    std::fs::write(dir.join("gadget.log"), write_git_log(&c.sibling_commits))?;
    let ndjson = |events: Vec<Event>| normalize(Vec::new(), events, &NormalizeOptions::default()).to_ndjson();
    std::fs::write(dir.join("widget.ndjson"), ndjson(c.focal_events))?;
    std::fs::write(dir.join("gadget.ndjson"), ndjson(c.sibling_events))?;
    let collection = epoch().checked_add_months(chrono::Months::new(months)).unwrap();
    let config = serde_json::json!({
        "repos": [
            {"repo": "acme/widget", "role": "focal", "git_log": "widget.log", "events": "widget.ndjson"},
            {"repo": "acme/gadget", "role": "sibling", "git_log": "gadget.log", "events": "gadget.ndjson"}
        ],
        "collection_date": crate::ingest::utc_z::format(&collection),
        "output_dir": "out"
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap() + "\n")?;
    Ok(path)
}

/// One subject of a piecewise-exponential survival simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSubject {
    pub x: f64,
    pub time: f64,
    pub event: bool,
}

/// Draws subjects with hazard `exp(a_k + beta * x)` on intervals given by
/// `cuts` (the last interval is open-ended), covariate `x ~ N(0,1)`, and
/// administrative censoring at `censor_at`.
pub fn simulate_piecewise_exponential(
    seed: u64,
    n: usize,
    beta: f64,
    cuts: &[f64],
    log_hazards: &[f64],
    censor_at: f64,
) -> Vec<SimSubject> {
    assert_eq!(cuts.len() + 1, log_hazards.len(), "one log hazard per interval");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Exp::new(1.0).unwrap();
    (0..n)
        .map(|_| {
            let x: f64 = rand_distr::StandardNormal.sample(&mut rng);
            // invert the cumulative hazard at a unit-exponential draw
            let mut budget: f64 = unit.sample(&mut rng);
            let mut t0 = 0.0;
            let mut time = f64::INFINITY;
            for (k, a) in log_hazards.iter().enumerate() {
                let rate = (a + beta * x).exp();
                let end = cuts.get(k).copied().unwrap_or(f64::INFINITY);
                let mass = rate * (end - t0);
                if budget <= mass {
                    time = t0 + budget / rate;
                    break;
                }
                budget -= mass;
                t0 = end;
            }
            if time > censor_at {
                SimSubject { x, time: censor_at, event: false }
            } else {
                SimSubject { x, time, event: true }
            }
        })
        .collect()
}
