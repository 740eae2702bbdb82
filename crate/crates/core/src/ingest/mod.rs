//! Raw data ingestion: git logs, code-hosting API payloads, and the
//! normalized event stream every downstream stage consumes.

mod fetch;
mod gitlog;
mod normalize;
mod payload;

pub use fetch::{
    CachedPage, Clock, FetchConfig, Fetcher, HttpResponse, OfflineTransport, ResponseCache, SystemClock, Transport,
    TransportError,
};
#[cfg(feature = "http")]
pub use fetch::HttpTransport;
pub use gitlog::{parse_git_log, write_git_log, GIT_LOG_FORMAT};
pub use normalize::{is_bot_login, normalize, BotPolicy, EventStream, NormalizeOptions};
pub use payload::{
    commit_comment_events, issue_events, issue_timeline_events, pull_events, review_events,
    thread_comment_events,
};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed git log record {index} at byte {offset}: {reason}")]
    MalformedRecord {
        index: usize,
        offset: usize,
        reason: String,
    },
    #[error("git log record {index} at byte {offset} is missing field `{field}`")]
    MissingField {
        index: usize,
        offset: usize,
        field: &'static str,
    },
    #[error("git log record {index}: invalid timestamp in `{field}`: {value:?}")]
    InvalidTimestamp {
        index: usize,
        field: &'static str,
        value: String,
    },
    #[error("invalid repository id {0:?}, expected `org/name`")]
    InvalidRepo(String),
    #[error("authentication rejected by {url} (status {status})")]
    Auth { url: String, status: u16 },
    #[error("request to {url} failed after {attempts} attempts: {reason}")]
    Exhausted {
        url: String,
        attempts: u32,
        reason: String,
    },
    #[error("unexpected response from {url}: status {status}")]
    Http { url: String, status: u16 },
    #[error("cache miss for {0} and the transport is offline")]
    CacheMiss(String),
    #[error("payload decode error for {context}: {source}")]
    Payload {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("normalized event file line {line}: {source}")]
    EventFile {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `org/name` pair identifying a hosted repository.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RepoId {
    pub org: String,
    pub name: String,
}

impl RepoId {
    pub fn new(org: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            org: org.into(),
            name: name.into(),
        }
    }
}

impl fmt::Display for RepoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.org, self.name)
    }
}

impl FromStr for RepoId {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((org, name))
                if !org.is_empty() && !name.is_empty() && !name.contains('/') =>
            {
                Ok(Self::new(org, name))
            }
            _ => Err(IngestError::InvalidRepo(s.to_string())),
        }
    }
}

impl Serialize for RepoId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RepoId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// An identity exactly as it appears in a source: a git name/email pair,
/// a platform login, or both.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawIdentity {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub login: Option<String>,
}

impl RawIdentity {
    pub fn git(name: impl Into<String>, email: impl Into<String>) -> Self {
        Self {
            name: Some(name.into()),
            email: Some(email.into()),
            login: None,
        }
    }

    pub fn login(login: impl Into<String>) -> Self {
        Self {
            login: Some(login.into()),
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        [&self.name, &self.email, &self.login]
            .iter()
            .all(|f| f.as_deref().map_or(true, |s| s.trim().is_empty()))
    }
}

impl fmt::Display for RawIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.name, &self.email, &self.login) {
            (_, _, Some(login)) if self.email.is_none() => write!(f, "@{login}"),
            (Some(name), Some(email), _) => write!(f, "{name} <{email}>"),
            (None, Some(email), _) => write!(f, "<{email}>"),
            (Some(name), None, _) => write!(f, "{name}"),
            _ => write!(f, "?"),
        }
    }
}

/// One git commit. Author and committer are kept apart: the committer
/// field is the evidence of commit rights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub hash: String,
    pub author_name: String,
    pub author_email: String,
    #[serde(with = "utc_z")]
    pub author_time: Timestamp,
    pub committer_name: String,
    pub committer_email: String,
    #[serde(with = "utc_z")]
    pub committer_time: Timestamp,
    pub repo: RepoId,
    #[serde(default)]
    pub files_touched: BTreeSet<String>,
    #[serde(default)]
    pub message: String,
}

impl CommitRecord {
    pub fn author(&self) -> RawIdentity {
        RawIdentity::git(&self.author_name, &self.author_email)
    }

    pub fn committer(&self) -> RawIdentity {
        RawIdentity::git(&self.committer_name, &self.committer_email)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Commit,
    IssueOpened,
    IssueClosed,
    IssueLabeled,
    IssueAssigned,
    IssueMilestoned,
    PrOpened,
    PrMerged,
    PrClosed,
    PrReview,
    IssueComment,
    PrComment,
    CommitComment,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::Commit,
        EventKind::IssueOpened,
        EventKind::IssueClosed,
        EventKind::IssueLabeled,
        EventKind::IssueAssigned,
        EventKind::IssueMilestoned,
        EventKind::PrOpened,
        EventKind::PrMerged,
        EventKind::PrClosed,
        EventKind::PrReview,
        EventKind::IssueComment,
        EventKind::PrComment,
        EventKind::CommitComment,
    ];

    pub fn is_comment(self) -> bool {
        matches!(
            self,
            EventKind::IssueComment | EventKind::PrComment | EventKind::CommitComment
        )
    }

    pub fn is_triage(self) -> bool {
        matches!(
            self,
            EventKind::IssueLabeled
                | EventKind::IssueAssigned
                | EventKind::IssueMilestoned
                | EventKind::IssueClosed
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Commit => "commit",
            EventKind::IssueOpened => "issue_opened",
            EventKind::IssueClosed => "issue_closed",
            EventKind::IssueLabeled => "issue_labeled",
            EventKind::IssueAssigned => "issue_assigned",
            EventKind::IssueMilestoned => "issue_milestoned",
            EventKind::PrOpened => "pr_opened",
            EventKind::PrMerged => "pr_merged",
            EventKind::PrClosed => "pr_closed",
            EventKind::PrReview => "pr_review",
            EventKind::IssueComment => "issue_comment",
            EventKind::PrComment => "pr_comment",
            EventKind::CommitComment => "commit_comment",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

/// A single normalized community activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub actor: RawIdentity,
    #[serde(with = "utc_z")]
    pub time: Timestamp,
    pub repo: RepoId,
    pub thread_id: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub labels: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opener: Option<RawIdentity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commit: Option<CommitRecord>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub bot: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub out_of_window: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Event {
    pub fn new(
        kind: EventKind,
        actor: RawIdentity,
        time: Timestamp,
        repo: RepoId,
        thread_id: impl Into<String>,
    ) -> Self {
        Self {
            kind,
            actor,
            time,
            repo,
            thread_id: thread_id.into(),
            labels: BTreeSet::new(),
            body: String::new(),
            opener: None,
            commit: None,
            bot: false,
            out_of_window: false,
        }
    }

    pub fn from_commit(commit: CommitRecord) -> Self {
        let mut ev = Event::new(
            EventKind::Commit,
            commit.author(),
            commit.author_time,
            commit.repo.clone(),
            commit_thread(&commit.repo, &commit.hash),
        );
        ev.commit = Some(commit);
        ev
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.labels = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_body(mut self, body: impl Into<String>) -> Self {
        self.body = body.into();
        self
    }

    pub fn with_opener(mut self, opener: RawIdentity) -> Self {
        self.opener = Some(opener);
        self
    }

    /// De-duplication key: (kind, thread, actor, time).
    pub fn key(&self) -> (EventKind, &str, &RawIdentity, Timestamp) {
        (self.kind, &self.thread_id, &self.actor, self.time)
    }
}

/// Thread id of an issue or pull request.
pub fn issue_thread(repo: &RepoId, number: u64) -> String {
    format!("{repo}#{number}")
}

/// Thread id of a commit (commit comments hang off it).
pub fn commit_thread(repo: &RepoId, sha: &str) -> String {
    format!("{repo}@{sha}")
}

/// ISO-8601 UTC with a trailing `Z`.
pub mod utc_z {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(t: &DateTime<Utc>) -> String {
        t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    pub fn parse(s: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&Utc))
    }

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }
}
