//! Paginated, cached, rate-limit aware retrieval of code-hosting events.
//!
//! Every page is written to the on-disk cache before it is decoded, so an
//! interrupted run resumes from the last complete page and a warm cache
//! replays without touching the network.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{TimeZone, Utc};
use log::{debug, info, warn};
use serde_json::Value;

use super::normalize::{normalize, NormalizeOptions};
use super::payload::{self, reconcile_open_labels};
use super::{utc_z, Event, EventKind, IngestError, RawIdentity, RepoId, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Header names are lowercase.
    pub headers: BTreeMap<String, String>,
    pub body: String,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("transport is offline")]
    Offline,
}

pub trait Transport {
    fn get(&self, url: &str, token: &str) -> Result<HttpResponse, TransportError>;
}

pub trait Clock {
    fn now(&self) -> Timestamp;
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Blocking HTTPS transport.
#[cfg(feature = "http")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("commitgate/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn get(&self, url: &str, token: &str) -> Result<HttpResponse, TransportError> {
        let resp = self
            .client
            .get(url)
            .header("Accept", "application/vnd.github+json")
            .bearer_auth(token)
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect();
        let body = resp.text().map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpResponse { status, headers, body })
    }
}

/// Raw API pages on disk: `<root>/<org>/<repo>/<endpoint>/page-NNNN.ndjson`,
/// one payload object per line, with a sibling `.next` file holding the
/// next-page URL (empty on the last page).
#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedPage {
    pub items: Vec<Value>,
    pub next: Option<String>,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn page_path(&self, repo: &RepoId, endpoint: &str, page: u32) -> PathBuf {
        let slug: String = endpoint
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
            .collect();
        self.root
            .join(&repo.org)
            .join(&repo.name)
            .join(slug)
            .join(format!("page-{page:04}.ndjson"))
    }

    pub fn get(&self, repo: &RepoId, endpoint: &str, page: u32) -> Result<Option<CachedPage>, IngestError> {
        let path = self.page_path(repo, endpoint, page);
        let marker = path.with_extension("next");
        if !marker.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let mut items = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            items.push(serde_json::from_str(line).map_err(|source| IngestError::Payload {
                context: path.display().to_string(),
                source,
            })?);
        }
        let next = fs::read_to_string(&marker)?.trim().to_string();
        Ok(Some(CachedPage {
            items,
            next: (!next.is_empty()).then_some(next),
        }))
    }

    pub fn put(&self, repo: &RepoId, endpoint: &str, page: u32, cached: &CachedPage) -> Result<(), IngestError> {
        let path = self.page_path(repo, endpoint, page);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut text = String::new();
        for item in &cached.items {
            text.push_str(&serde_json::to_string(item).expect("json value serializes"));
            text.push('\n');
        }
        fs::write(&path, text)?;
        // The marker is written last; a page without it is treated as absent.
        fs::write(path.with_extension("next"), cached.next.as_deref().unwrap_or(""))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub base_url: String,
    pub per_page: u32,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    /// Upper bound on consecutive rate-limit waits for a single request.
    pub max_rate_limit_waits: u32,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.github.com".into(),
            per_page: 100,
            max_attempts: 5,
            backoff_base: Duration::from_secs(2),
            max_rate_limit_waits: 50,
        }
    }
}

pub struct Fetcher<T, C = SystemClock> {
    transport: T,
    clock: C,
    cache: ResponseCache,
    token: String,
    config: FetchConfig,
}

/// Parses the `rel="next"` target out of a `Link` header.
pub(crate) fn next_link(header: Option<&str>) -> Option<String> {
    header?.split(',').find_map(|part| {
        let mut pieces = part.split(';');
        let url = pieces.next()?.trim();
        let is_next = pieces.any(|p| p.trim().replace(' ', "") == "rel=\"next\"");
        (is_next && url.starts_with('<') && url.ends_with('>')).then(|| url[1..url.len() - 1].to_string())
    })
}

impl<T: Transport, C: Clock> Fetcher<T, C> {
    pub fn new(transport: T, clock: C, cache: ResponseCache, token: impl Into<String>, config: FetchConfig) -> Self {
        Self {
            transport,
            clock,
            cache,
            token: token.into(),
            config,
        }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    fn rate_limit_wait(&self, resp: &HttpResponse) -> Option<Duration> {
        if resp.status != 403 && resp.status != 429 {
            return None;
        }
        if let Some(secs) = resp.header("retry-after").and_then(|v| v.trim().parse::<u64>().ok()) {
            return Some(Duration::from_secs(secs));
        }
        if resp.header("x-ratelimit-remaining").map(str::trim) == Some("0") {
            let reset = resp
                .header("x-ratelimit-reset")
                .and_then(|v| v.trim().parse::<i64>().ok())
                .and_then(|s| Utc.timestamp_opt(s, 0).single())?;
            let wait = (reset - self.clock.now()).num_milliseconds().max(0) as u64;
            // Reset is second-granular; wait one extra second past it.
            return Some(Duration::from_millis(wait + 1000));
        }
        None
    }

    /// GET with the retry policy: rate limits wait for the advertised reset,
    /// transient failures back off exponentially up to `max_attempts`.
    pub fn get(&self, url: &str) -> Result<HttpResponse, IngestError> {
        let mut attempts = 0;
        let mut waits = 0;
        loop {
            let failure = match self.transport.get(url, &self.token) {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp),
                Ok(resp) => {
                    if let Some(wait) = self.rate_limit_wait(&resp) {
                        waits += 1;
                        if waits > self.config.max_rate_limit_waits {
                            return Err(IngestError::Exhausted {
                                url: url.into(),
                                attempts: waits,
                                reason: "rate limit did not reset".into(),
                            });
                        }
                        info!("rate limited on {url}; sleeping {wait:?}");
                        self.clock.sleep(wait);
                        continue;
                    }
                    match resp.status {
                        401 | 403 => return Err(IngestError::Auth { url: url.into(), status: resp.status }),
                        408 | 500..=599 => format!("status {}", resp.status),
                        status => return Err(IngestError::Http { url: url.into(), status }),
                    }
                }
                Err(TransportError::Offline) => return Err(IngestError::CacheMiss(url.into())),
                Err(TransportError::Network(msg)) => msg,
            };
            attempts += 1;
            if attempts >= self.config.max_attempts {
                return Err(IngestError::Exhausted {
                    url: url.into(),
                    attempts,
                    reason: failure,
                });
            }
            let backoff = self.config.backoff_base * 2u32.pow(attempts - 1);
            warn!("transient failure on {url} ({failure}); retry {attempts} in {backoff:?}");
            self.clock.sleep(backoff);
        }
    }

    /// All items of a paginated endpoint, from cache where available.
    pub fn fetch_endpoint(&self, repo: &RepoId, endpoint: &str) -> Result<Vec<Value>, IngestError> {
        let mut url = format!("{}/repos/{}/{}", self.config.base_url.trim_end_matches('/'), repo, endpoint);
        let mut items = Vec::new();
        let mut page = 1;
        loop {
            let cached = match self.cache.get(repo, endpoint, page)? {
                Some(hit) => {
                    debug!("cache hit {repo} {endpoint} page {page}");
                    hit
                }
                None => {
                    let resp = self.get(&url)?;
                    let body: Value = serde_json::from_str(&resp.body).map_err(|source| IngestError::Payload {
                        context: url.clone(),
                        source,
                    })?;
                    let page_items = match body {
                        Value::Array(v) => v,
                        other => vec![other],
                    };
                    let fresh = CachedPage {
                        items: page_items,
                        next: next_link(resp.header("link")),
                    };
                    self.cache.put(repo, endpoint, page, &fresh)?;
                    fresh
                }
            };
            items.extend(cached.items);
            match cached.next {
                Some(next) => {
                    url = next;
                    page += 1;
                }
                None => return Ok(items),
            }
        }
    }

    /// Retrieves and normalizes the requested event kinds for one repo.
    pub fn fetch_events(
        &self,
        repo: &RepoId,
        kinds: &BTreeSet<EventKind>,
        since: Option<Timestamp>,
    ) -> Result<Vec<Event>, IngestError> {
        use EventKind::*;
        let wants = |ks: &[EventKind]| ks.iter().any(|k| kinds.contains(k));
        let pp = self.config.per_page;
        let since_q = since.map(|s| format!("&since={}", utc_z::format(&s))).unwrap_or_default();
        let mut events = Vec::new();

        let need_threads = wants(&[IssueComment, PrComment]);
        let mut threads: Vec<(u64, bool, Option<RawIdentity>)> = Vec::new();
        if wants(&[IssueOpened]) || need_threads {
            for item in self.fetch_endpoint(repo, &format!("issues?state=all&per_page={pp}{since_q}"))? {
                events.extend(payload::issue_events(repo, &item)?);
                let number = item.get("number").and_then(Value::as_u64);
                let has_comments = item.get("comments").and_then(Value::as_u64) != Some(0);
                if let (Some(n), true) = (number, has_comments) {
                    let is_pr = item.get("pull_request").is_some();
                    let opener = item
                        .pointer("/user/login")
                        .and_then(Value::as_str)
                        .map(RawIdentity::login);
                    threads.push((n, is_pr, opener));
                }
            }
        }

        let mut pulls: Vec<(u64, Option<RawIdentity>)> = Vec::new();
        if wants(&[PrOpened, PrMerged, PrClosed, PrReview]) {
            for item in self.fetch_endpoint(repo, &format!("pulls?state=all&per_page={pp}"))? {
                events.extend(payload::pull_events(repo, &item)?);
                if let Some(n) = item.get("number").and_then(Value::as_u64) {
                    let opener = item.pointer("/user/login").and_then(Value::as_str).map(RawIdentity::login);
                    pulls.push((n, opener));
                }
            }
        }

        if wants(&[PrReview]) {
            for (n, opener) in &pulls {
                for item in self.fetch_endpoint(repo, &format!("pulls/{n}/reviews?per_page={pp}"))? {
                    events.extend(payload::review_events(repo, *n, opener.as_ref(), &item)?);
                }
            }
        }

        if need_threads {
            for (n, is_pr, opener) in &threads {
                for item in self.fetch_endpoint(repo, &format!("issues/{n}/comments?per_page={pp}{since_q}"))? {
                    events.extend(payload::thread_comment_events(repo, *n, *is_pr, opener.as_ref(), &item)?);
                }
            }
        }

        if wants(&[CommitComment]) {
            for item in self.fetch_endpoint(repo, &format!("comments?per_page={pp}"))? {
                events.extend(payload::commit_comment_events(repo, &item)?);
            }
        }

        if wants(&[IssueLabeled, IssueAssigned, IssueMilestoned, IssueClosed]) {
            for item in self.fetch_endpoint(repo, &format!("issues/events?per_page={pp}"))? {
                events.extend(payload::issue_timeline_events(repo, &item)?);
            }
        }

        reconcile_open_labels(&mut events);
        events.retain(|e| kinds.contains(&e.kind) && since.map_or(true, |s| e.time >= s));
        Ok(normalize(Vec::new(), events, &NormalizeOptions::default()).into_events())
    }
}

/// Transport that never touches the network; cache misses become errors.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn get(&self, _url: &str, _token: &str) -> Result<HttpResponse, TransportError> {
        Err(TransportError::Offline)
    }
}
