//! Mapping from code-hosting REST payloads to [`Event`]s.

use std::collections::{BTreeSet, HashSet};

use serde::Deserialize;
use serde_json::Value;

use super::{commit_thread, issue_thread, Event, EventKind, IngestError, RawIdentity, RepoId, Timestamp};

#[derive(Deserialize)]
struct User {
    login: String,
}

#[derive(Deserialize)]
struct Label {
    name: String,
}

#[derive(Deserialize)]
struct IssuePayload {
    number: u64,
    user: Option<User>,
    created_at: Timestamp,
    #[serde(default)]
    labels: Vec<Label>,
    #[serde(default)]
    pull_request: Option<Value>,
}

#[derive(Deserialize)]
struct PullPayload {
    number: u64,
    user: Option<User>,
    created_at: Timestamp,
    closed_at: Option<Timestamp>,
    merged_at: Option<Timestamp>,
    #[serde(default)]
    merged_by: Option<User>,
}

#[derive(Deserialize)]
struct ReviewPayload {
    user: Option<User>,
    submitted_at: Option<Timestamp>,
    #[serde(default)]
    body: Option<String>,
}

#[derive(Deserialize)]
struct CommentPayload {
    user: Option<User>,
    created_at: Timestamp,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    commit_id: Option<String>,
}

#[derive(Deserialize)]
struct IssueRef {
    number: u64,
    user: Option<User>,
    #[serde(default)]
    pull_request: Option<Value>,
}

#[derive(Deserialize)]
struct TimelinePayload {
    actor: Option<User>,
    event: String,
    created_at: Timestamp,
    #[serde(default)]
    label: Option<Label>,
    issue: IssueRef,
}

fn decode<T: for<'de> Deserialize<'de>>(item: &Value, context: &str) -> Result<T, IngestError> {
    T::deserialize(item).map_err(|source| IngestError::Payload {
        context: context.to_string(),
        source,
    })
}

fn who(user: Option<User>) -> Option<RawIdentity> {
    user.filter(|u| !u.login.trim().is_empty())
        .map(|u| RawIdentity::login(u.login))
}

/// `issue_opened` from a `repos/{org}/{repo}/issues` item. Pull requests
/// listed there are skipped; they come from the pulls endpoint.
pub fn issue_events(repo: &RepoId, item: &Value) -> Result<Vec<Event>, IngestError> {
    let p: IssuePayload = decode(item, "issue")?;
    if p.pull_request.is_some() {
        return Ok(Vec::new());
    }
    let Some(actor) = who(p.user) else {
        return Ok(Vec::new());
    };
    let ev = Event::new(EventKind::IssueOpened, actor.clone(), p.created_at, repo.clone(), issue_thread(repo, p.number))
        .with_labels(p.labels.into_iter().map(|l| l.name))
        .with_opener(actor);
    Ok(vec![ev])
}

/// `pr_opened`, plus `pr_merged` or `pr_closed` when the PR has finished.
pub fn pull_events(repo: &RepoId, item: &Value) -> Result<Vec<Event>, IngestError> {
    let p: PullPayload = decode(item, "pull")?;
    let Some(author) = who(p.user) else {
        return Ok(Vec::new());
    };
    let thread = issue_thread(repo, p.number);
    let mut out = vec![Event::new(EventKind::PrOpened, author.clone(), p.created_at, repo.clone(), &thread)
        .with_opener(author.clone())];
    if let Some(merged) = p.merged_at {
        let merger = who(p.merged_by).unwrap_or_else(|| author.clone());
        out.push(Event::new(EventKind::PrMerged, merger, merged, repo.clone(), &thread).with_opener(author));
    } else if let Some(closed) = p.closed_at {
        out.push(Event::new(EventKind::PrClosed, author.clone(), closed, repo.clone(), &thread).with_opener(author));
    }
    Ok(out)
}

/// `pr_review` from a `pulls/{n}/reviews` item; pending reviews are skipped.
pub fn review_events(
    repo: &RepoId,
    number: u64,
    opener: Option<&RawIdentity>,
    item: &Value,
) -> Result<Vec<Event>, IngestError> {
    let p: ReviewPayload = decode(item, "review")?;
    let (Some(actor), Some(time)) = (who(p.user), p.submitted_at) else {
        return Ok(Vec::new());
    };
    let mut ev = Event::new(EventKind::PrReview, actor, time, repo.clone(), issue_thread(repo, number))
        .with_body(p.body.unwrap_or_default());
    ev.opener = opener.cloned();
    Ok(vec![ev])
}

/// Comment under an issue or PR conversation (`issues/{n}/comments`).
pub fn thread_comment_events(
    repo: &RepoId,
    number: u64,
    is_pr: bool,
    opener: Option<&RawIdentity>,
    item: &Value,
) -> Result<Vec<Event>, IngestError> {
    let p: CommentPayload = decode(item, "comment")?;
    let Some(actor) = who(p.user) else {
        return Ok(Vec::new());
    };
    let kind = if is_pr { EventKind::PrComment } else { EventKind::IssueComment };
    let mut ev = Event::new(kind, actor, p.created_at, repo.clone(), issue_thread(repo, number))
        .with_body(p.body.unwrap_or_default());
    ev.opener = opener.cloned();
    Ok(vec![ev])
}

/// Commit comment from the repository-wide `comments` endpoint.
pub fn commit_comment_events(repo: &RepoId, item: &Value) -> Result<Vec<Event>, IngestError> {
    let p: CommentPayload = decode(item, "commit comment")?;
    let (Some(actor), Some(sha)) = (who(p.user), p.commit_id) else {
        return Ok(Vec::new());
    };
    Ok(vec![Event::new(EventKind::CommitComment, actor, p.created_at, repo.clone(), commit_thread(repo, &sha))
        .with_body(p.body.unwrap_or_default())])
}

/// Label, assignment, milestone, and close actions from `issues/events`.
/// Actions on pull requests are ignored.
pub fn issue_timeline_events(repo: &RepoId, item: &Value) -> Result<Vec<Event>, IngestError> {
    let p: TimelinePayload = decode(item, "issue event")?;
    if p.issue.pull_request.is_some() {
        return Ok(Vec::new());
    }
    let kind = match p.event.as_str() {
        "labeled" => EventKind::IssueLabeled,
        "assigned" => EventKind::IssueAssigned,
        "milestoned" => EventKind::IssueMilestoned,
        "closed" => EventKind::IssueClosed,
        _ => return Ok(Vec::new()),
    };
    let Some(actor) = who(p.actor) else {
        return Ok(Vec::new());
    };
    let mut ev = Event::new(kind, actor, p.created_at, repo.clone(), issue_thread(repo, p.issue.number));
    ev.opener = who(p.issue.user);
    if let Some(label) = p.label {
        ev.labels = BTreeSet::from([label.name]);
    }
    Ok(vec![ev])
}

/// Issue listings report current labels only. Labels that also have a
/// timestamped `issue_labeled` event are removed from `issue_opened`, so
/// label state is never back-dated to the issue's creation.
pub(crate) fn reconcile_open_labels(events: &mut [Event]) {
    let timed: HashSet<(String, String)> = events
        .iter()
        .filter(|e| e.kind == EventKind::IssueLabeled)
        .flat_map(|e| e.labels.iter().map(|l| (e.thread_id.clone(), l.clone())))
        .collect();
    for ev in events.iter_mut().filter(|e| e.kind == EventKind::IssueOpened) {
        let thread = ev.thread_id.clone();
        ev.labels.retain(|l| !timed.contains(&(thread.clone(), l.clone())));
    }
}
