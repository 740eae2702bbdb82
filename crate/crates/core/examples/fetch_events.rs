//! Paginated API retrieval through the response cache.
//!
//!     COMMITGATE_TOKEN=... cargo run --example fetch_events -- org/name
//!
//! Without a token, a canned transport stands in for the network, and a
//! second offline pass is served entirely from the cache.

use std::collections::{BTreeMap, BTreeSet};

use commitgate::ingest::{
    EventKind, FetchConfig, Fetcher, HttpResponse, OfflineTransport, RepoId, ResponseCache, SystemClock, Transport,
    TransportError,
};

struct Canned;

impl Transport for Canned {
    fn get(&self, url: &str, _token: &str) -> Result<HttpResponse, TransportError> {
        let body = if url.contains("/issues/events") {
            r#"[{"actor":{"login":"maint"},"event":"labeled","created_at":"2023-01-02T09:00:00Z","label":{"name":"good first issue"},"issue":{"number":1,"user":{"login":"octo"}}}]"#
        } else if url.contains("/issues/1/comments") {
            r#"[{"user":{"login":"maint"},"created_at":"2023-01-03T10:00:00Z","body":"thanks!"}]"#
        } else if url.contains("/issues?") {
            r#"[{"number":1,"user":{"login":"octo"},"created_at":"2023-01-01T08:00:00Z","labels":[],"comments":1}]"#
        } else if url.contains("/pulls?") {
            r#"[{"number":2,"user":{"login":"octo"},"created_at":"2023-01-05T08:00:00Z","closed_at":"2023-01-06T08:00:00Z","merged_at":"2023-01-06T08:00:00Z","merged_by":{"login":"maint"}}]"#
        } else {
            "[]"
        };
        Ok(HttpResponse { status: 200, headers: BTreeMap::new(), body: body.into() })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cache_dir = std::env::temp_dir().join("commitgate-fetch-example");
    let kinds: BTreeSet<EventKind> = EventKind::ALL.into_iter().collect();
    let token = std::env::var("COMMITGATE_TOKEN").ok();
    let repo_arg = std::env::args().nth(1);

    #[cfg(feature = "http")]
    if let (Some(token), Some(repo)) = (&token, &repo_arg) {
        let repo: RepoId = repo.parse()?;
        let transport = commitgate::ingest::HttpTransport::new()?;
        let fetcher = Fetcher::new(transport, SystemClock, ResponseCache::new(&cache_dir), token.as_str(), FetchConfig::default());
        let events = fetcher.fetch_events(&repo, &kinds, None)?;
        println!("{} events fetched for {repo}; cached under {}", events.len(), cache_dir.display());
        return Ok(());
    }
    let _ = (token, repo_arg);

    let _ = std::fs::remove_dir_all(&cache_dir);
    let repo = RepoId::new("acme", "widget");
    let online = Fetcher::new(Canned, SystemClock, ResponseCache::new(&cache_dir), "", FetchConfig::default());
    let events = online.fetch_events(&repo, &kinds, None)?;
    for e in &events {
        println!("{}  {:<14} {:<10} {}", e.time, e.kind.as_str(), e.actor.login.as_deref().unwrap_or("?"), e.thread_id);
    }

    let offline = Fetcher::new(OfflineTransport, SystemClock, ResponseCache::new(&cache_dir), "", FetchConfig::default());
    let again = offline.fetch_events(&repo, &kinds, None)?;
    println!("offline replay from cache: {} events, identical = {}", again.len(), again == events);
    Ok(())
}
