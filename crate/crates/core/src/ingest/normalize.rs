use std::cmp::Ordering;
use std::collections::BTreeSet;

use log::warn;

use super::{CommitRecord, Event, IngestError, RawIdentity, Timestamp};

/// Accounts treated as automation: logins ending in `[bot]` plus an
/// operator-supplied list (matched case-insensitively against login,
/// name, and email).
#[derive(Debug, Clone, Default)]
pub struct BotPolicy {
    pub extra: BTreeSet<String>,
}

impl BotPolicy {
    pub fn with_accounts<I, S>(accounts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            extra: accounts
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .collect(),
        }
    }

    pub fn is_bot(&self, who: &RawIdentity) -> bool {
        let fields = [&who.login, &who.name, &who.email];
        fields.iter().filter_map(|f| f.as_deref()).any(|f| {
            let f = f.trim().to_lowercase();
            is_bot_login(&f) || f.contains("[bot]@") || self.extra.contains(&f)
        })
    }
}

pub fn is_bot_login(login: &str) -> bool {
    login.trim().to_lowercase().ends_with("[bot]")
}

#[derive(Debug, Clone, Default)]
pub struct NormalizeOptions {
    /// Events outside `[start, end]` are kept but flagged `out_of_window`.
    pub window: Option<(Timestamp, Timestamp)>,
    pub bots: BotPolicy,
}

/// Chronologically ordered, de-duplicated activity.
///
/// Order is `(time, kind, thread_id)`; remaining ties fall back to the actor
/// and then the full payload so the order is total.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Combines already-normalized streams (e.g. focal and sibling repos).
    pub fn merge<I: IntoIterator<Item = EventStream>>(streams: I) -> EventStream {
        let events = streams.into_iter().flat_map(|s| s.events).collect();
        EventStream {
            events: sort_dedup(events),
        }
    }

    /// Keeps only events satisfying `keep`; order is preserved.
    pub fn filter(&self, mut keep: impl FnMut(&Event) -> bool) -> EventStream {
        EventStream {
            events: self.events.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Reads a normalized event file, restoring the canonical order.
    pub fn from_ndjson(text: &str) -> Result<EventStream, IngestError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ev: Event = serde_json::from_str(line)
                .map_err(|source| IngestError::EventFile { line: i + 1, source })?;
            events.push(ev);
        }
        Ok(EventStream {
            events: sort_dedup(events),
        })
    }

    pub fn last_time(&self) -> Option<Timestamp> {
        self.events.iter().map(|e| e.time).max()
    }
}

fn canonical_order(a: &Event, b: &Event) -> Ordering {
    a.time
        .cmp(&b.time)
        .then(a.kind.cmp(&b.kind))
        .then_with(|| a.thread_id.cmp(&b.thread_id))
        .then_with(|| a.actor.cmp(&b.actor))
        .then_with(|| {
            let sa = serde_json::to_string(a).unwrap_or_default();
            let sb = serde_json::to_string(b).unwrap_or_default();
            sa.cmp(&sb)
        })
}

fn sort_dedup(mut events: Vec<Event>) -> Vec<Event> {
    events.sort_by(canonical_order);
    // The dedup key is a prefix of the sort order, so duplicates are adjacent.
    let mut out: Vec<Event> = Vec::with_capacity(events.len());
    for ev in events {
        if let Some(prev) = out.last() {
            if prev.key() == ev.key() {
                warn!(
                    "dropping duplicate {} event on {} by {} at {}",
                    ev.kind, ev.thread_id, ev.actor, ev.time
                );
                continue;
            }
        }
        out.push(ev);
    }
    out
}

/// Merges commits and platform events into one canonical stream.
pub fn normalize(
    commits: Vec<CommitRecord>,
    raw_events: Vec<Event>,
    opts: &NormalizeOptions,
) -> EventStream {
    let mut events: Vec<Event> = commits.into_iter().map(Event::from_commit).collect();
    events.extend(raw_events);
    for ev in &mut events {
        ev.bot = opts.bots.is_bot(&ev.actor);
        ev.out_of_window = match opts.window {
            Some((start, end)) => ev.time < start || ev.time > end,
            None => false,
        };
    }
    EventStream {
        events: sort_dedup(events),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{EventKind, RepoId};
    use chrono::{Duration, TimeZone, Utc};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(h: i64) -> Timestamp {
        Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap() + Duration::hours(h)
    }

    fn repo() -> RepoId {
        RepoId::new("acme", "widget")
    }

    fn sample(n: usize, seed: u64) -> Vec<Event> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        (0..n)
            .map(|_| {
                let kind = EventKind::ALL[rng.random_range(1..EventKind::ALL.len())];
                Event::new(
                    kind,
                    RawIdentity::login(format!("u{}", rng.random_range(0..5))),
                    t(rng.random_range(0..10)),
                    repo(),
                    format!("acme/widget#{}", rng.random_range(0..4)),
                )
                .with_body(format!("b{}", rng.random_range(0..3)))
            })
            .collect()
    }

    #[test]
    fn empty_inputs_give_empty_stream() {
        assert!(normalize(vec![], vec![], &NormalizeOptions::default()).is_empty());
    }

    #[test]
    fn identical_times_use_kind_then_thread() {
        let a = Event::new(EventKind::PrOpened, RawIdentity::login("x"), t(0), repo(), "acme/widget#2");
        let b = Event::new(EventKind::IssueOpened, RawIdentity::login("y"), t(0), repo(), "acme/widget#9");
        let c = Event::new(EventKind::IssueOpened, RawIdentity::login("z"), t(0), repo(), "acme/widget#1");
        let s = normalize(vec![], vec![a, b, c], &NormalizeOptions::default());
        let order: Vec<_> = s.iter().map(|e| e.thread_id.as_str()).collect();
        assert_eq!(order, ["acme/widget#1", "acme/widget#9", "acme/widget#2"]);
    }

    #[test]
    fn permutation_invariant_and_idempotent() {
        let events = sample(200, 7);
        let base = normalize(vec![], events.clone(), &NormalizeOptions::default());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let mut shuffled = events.clone();
            shuffled.shuffle(&mut rng);
            assert_eq!(normalize(vec![], shuffled, &NormalizeOptions::default()), base);
        }
        let again = normalize(vec![], base.clone().into_events(), &NormalizeOptions::default());
        assert_eq!(again, base);
    }

    #[test]
    fn duplicates_are_dropped() {
        let a = Event::new(EventKind::IssueComment, RawIdentity::login("x"), t(1), repo(), "acme/widget#1");
        let s = normalize(vec![], vec![a.clone(), a], &NormalizeOptions::default());
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn bots_and_window_are_flagged() {
        let a = Event::new(EventKind::IssueComment, RawIdentity::login("dependabot[bot]"), t(1), repo(), "acme/widget#1");
        let b = Event::new(EventKind::IssueComment, RawIdentity::login("ci-runner"), t(50), repo(), "acme/widget#1");
        let opts = NormalizeOptions {
            window: Some((t(0), t(10))),
            bots: BotPolicy::with_accounts(["CI-Runner"]),
        };
        let s = normalize(vec![], vec![a, b], &opts);
        assert!(s.events()[0].bot && !s.events()[0].out_of_window);
        assert!(s.events()[1].bot && s.events()[1].out_of_window);
    }

    #[test]
    fn ndjson_round_trip() {
        let s = normalize(vec![], sample(50, 3), &NormalizeOptions::default());
        let text = s.to_ndjson();
        assert!(text.lines().next().unwrap().contains("Z\""));
        assert_eq!(EventStream::from_ndjson(&text).unwrap(), s);
    }
}
