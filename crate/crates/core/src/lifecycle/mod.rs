//! Committer-immigration detection.
//!
//! A developer acquires commit rights the first time their identity shows
//! up in a commit's committer field. Developers whose committer-field
//! appearance comes no later than their first activity are founding
//! committers; everybody else who shows activity is a candidate, either
//! immigrating at their first committer-field timestamp or censored at the
//! collection date.

mod stats;

pub use stats::{cliffs_delta, mann_whitney_u, MannWhitney};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calendar::fractional_months;
use crate::identity::{DevId, IdentityMap};
use crate::ingest::{utc_z, EventKind, EventStream, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum LifecycleError {
    #[error("correction references unknown developer {0}")]
    UnknownDeveloper(DevId),
    #[error("correction for {dev}: {reason}")]
    InvalidCorrection { dev: DevId, reason: String },
    #[error("corrections file: {0}")]
    Csv(#[from] csv::Error),
    #[error("no contributing developers")]
    NoDevelopers,
    #[error("candidate pool is empty")]
    NoCandidates,
    #[error("sample {0} is empty")]
    EmptySample(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmigrationEvent {
    pub dev: DevId,
    #[serde(with = "utc_z")]
    pub first_appearance: Timestamp,
    #[serde(default, with = "opt_utc_z")]
    pub immigration_time: Option<Timestamp>,
    /// Months from first appearance to immigration or censoring.
    pub transition_interval: f64,
}

impl ImmigrationEvent {
    pub fn censored(&self) -> bool {
        self.immigration_time.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub candidates: BTreeSet<DevId>,
    pub immigrants: BTreeSet<DevId>,
    pub founding_committers: BTreeSet<DevId>,
    pub exclusions: BTreeMap<DevId, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionAction {
    Exclude,
    Redate,
}

impl fmt::Display for CorrectionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionAction::Exclude => "exclude",
            CorrectionAction::Redate => "redate",
        })
    }
}

/// Operator verdict from manual validation of a detected case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub dev_id: DevId,
    pub action: CorrectionAction,
    pub timestamp: Option<Timestamp>,
    pub reason: String,
}

/// Reads `dev_id,action,timestamp,reason` rows.
pub fn read_corrections(text: &str) -> Result<Vec<Correction>, LifecycleError> {
    #[derive(Deserialize)]
    struct Row {
        dev_id: String,
        action: CorrectionAction,
        timestamp: String,
        reason: String,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let dev_id = DevId(row.dev_id);
        let timestamp = if row.timestamp.is_empty() {
            None
        } else {
            Some(utc_z::parse(&row.timestamp).map_err(|e| LifecycleError::InvalidCorrection {
                dev: dev_id.clone(),
                reason: format!("bad timestamp {:?}: {e}", row.timestamp),
            })?)
        };
        out.push(Correction {
            dev_id,
            action: row.action,
            timestamp,
            reason: row.reason,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LifecycleConfig {
    /// Event kinds that count as "appearing in the community".
    pub appearance_kinds: BTreeSet<EventKind>,
    pub exclude_bots: bool,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            appearance_kinds: EventKind::ALL.into_iter().collect(),
            exclude_bots: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FirstSeen {
    time: Timestamp,
    /// The first event was a commit this developer also committed.
    self_committed: bool,
}

pub fn detect_immigrations(
    stream: &EventStream,
    ids: &IdentityMap,
    corrections: &[Correction],
    collection_date: Timestamp,
    cfg: &LifecycleConfig,
) -> Result<(Vec<ImmigrationEvent>, CandidatePool), LifecycleError> {
    let mut first: BTreeMap<DevId, FirstSeen> = BTreeMap::new();
    let mut first_commit: BTreeMap<DevId, Timestamp> = BTreeMap::new();

    for ev in stream.iter().filter(|e| e.time <= collection_date) {
        let committer = ev.commit.as_ref().and_then(|c| {
            ids.dev_of(&c.committer()).map(|d| (d.clone(), c.committer_time))
        });
        if let Some((dev, at)) = &committer {
            if *at <= collection_date {
                first_commit
                    .entry(dev.clone())
                    .and_modify(|t| *t = (*t).min(*at))
                    .or_insert(*at);
            }
        }
        if !cfg.appearance_kinds.contains(&ev.kind) {
            continue;
        }
        let Some(dev) = ids.dev_of(&ev.actor) else { continue };
        let self_committed = committer.as_ref().is_some_and(|(c, _)| c == dev);
        match first.get(dev) {
            Some(seen) if seen.time <= ev.time => {}
            _ => {
                first.insert(dev.clone(), FirstSeen { time: ev.time, self_committed });
            }
        }
    }

    let mut pool = CandidatePool::default();
    let mut immigration: BTreeMap<DevId, Option<Timestamp>> = BTreeMap::new();
    let devs: BTreeSet<&DevId> = first.keys().chain(first_commit.keys()).collect();
    for dev in devs {
        if cfg.exclude_bots && ids.is_bot(dev) {
            pool.exclusions.insert(dev.clone(), "bot account".into());
            continue;
        }
        let seen = first.get(dev);
        let committed = first_commit.get(dev);
        let founding = match (seen, committed) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(s), Some(c)) => *c <= s.time || s.self_committed,
        };
        if founding {
            pool.founding_committers.insert(dev.clone());
        } else if seen.is_some() {
            pool.candidates.insert(dev.clone());
            immigration.insert(dev.clone(), committed.copied());
        }
    }

    for c in corrections {
        if ids.get(&c.dev_id).is_none() {
            return Err(LifecycleError::UnknownDeveloper(c.dev_id.clone()));
        }
        match c.action {
            CorrectionAction::Exclude => {
                pool.candidates.remove(&c.dev_id);
                pool.founding_committers.remove(&c.dev_id);
                immigration.remove(&c.dev_id);
                pool.exclusions.insert(c.dev_id.clone(), c.reason.clone());
            }
            CorrectionAction::Redate => {
                let invalid = |reason: &str| LifecycleError::InvalidCorrection {
                    dev: c.dev_id.clone(),
                    reason: reason.into(),
                };
                let at = c.timestamp.ok_or_else(|| invalid("redate needs a timestamp"))?;
                if !pool.candidates.contains(&c.dev_id) {
                    return Err(invalid("developer is not a candidate"));
                }
                let appeared = first[&c.dev_id].time;
                if at < appeared || at > collection_date {
                    return Err(invalid("timestamp outside the observation window"));
                }
                immigration.insert(c.dev_id.clone(), Some(at));
            }
        }
    }

    let events: Vec<ImmigrationEvent> = immigration
        .into_iter()
        .map(|(dev, at)| {
            let appeared = first[&dev].time;
            let end = at.unwrap_or(collection_date);
            ImmigrationEvent {
                transition_interval: fractional_months(appeared, end),
                dev,
                first_appearance: appeared,
                immigration_time: at,
            }
        })
        .collect();
    pool.immigrants = events.iter().filter(|e| !e.censored()).map(|e| e.dev.clone()).collect();
    Ok((events, pool))
}

/// Share of contributing developers that ever appear as committer.
pub fn committer_proportion(stream: &EventStream, ids: &IdentityMap) -> Result<f64, LifecycleError> {
    let mut contributors = BTreeSet::new();
    let mut committers = BTreeSet::new();
    for ev in stream.iter() {
        if let Some(d) = ids.dev_of(&ev.actor).filter(|d| !ids.is_bot(d)) {
            contributors.insert(d.clone());
        }
        if let Some(d) = ev.commit.as_ref().and_then(|c| ids.dev_of(&c.committer())).filter(|d| !ids.is_bot(d)) {
            contributors.insert(d.clone());
            committers.insert(d.clone());
        }
    }
    if contributors.is_empty() {
        return Err(LifecycleError::NoDevelopers);
    }
    Ok(committers.len() as f64 / contributors.len() as f64)
}

/// Share of candidates who became committers.
pub fn immigration_rate(pool: &CandidatePool) -> Result<f64, LifecycleError> {
    if pool.candidates.is_empty() {
        return Err(LifecycleError::NoCandidates);
    }
    Ok(pool.immigrants.len() as f64 / pool.candidates.len() as f64)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ImmigrationRow {
    dev_id: String,
    first_appearance: String,
    immigration_time: String,
    censored: bool,
    interval_months: f64,
}

pub fn write_immigrations_csv(events: &[ImmigrationEvent]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in events {
        w.serialize(ImmigrationRow {
            dev_id: e.dev.to_string(),
            first_appearance: utc_z::format(&e.first_appearance),
            immigration_time: e.immigration_time.as_ref().map(utc_z::format).unwrap_or_default(),
            censored: e.censored(),
            interval_months: e.transition_interval,
        })
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn read_immigrations_csv(text: &str) -> Result<Vec<ImmigrationEvent>, LifecycleError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize::<ImmigrationRow>() {
        let row = row?;
        let dev = DevId(row.dev_id);
        let bad = |what: &str| LifecycleError::InvalidCorrection { dev: dev.clone(), reason: format!("bad {what}") };
        let first_appearance = utc_z::parse(&row.first_appearance).map_err(|_| bad("first_appearance"))?;
        let immigration_time = if row.immigration_time.is_empty() {
            None
        } else {
            Some(utc_z::parse(&row.immigration_time).map_err(|_| bad("immigration_time"))?)
        };
        if immigration_time.is_none() != row.censored {
            return Err(bad("censored flag"));
        }
        out.push(ImmigrationEvent {
            dev,
            first_appearance,
            immigration_time,
            transition_interval: row.interval_months,
        });
    }
    Ok(out)
}

mod opt_utc_z {
    use super::utc_z;
    use crate::ingest::Timestamp;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_str(&utc_z::format(t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| utc_z::parse(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}
