//! Developer identity resolution and company affiliation.
//!
//! Raw identities are merged by the transitive closure of three rules:
//! identical email, identical login (noreply addresses reveal a login), and
//! identical normalized name when no other emailed developer shares it.

mod affiliation;

pub use affiliation::{affiliation_from_emails, email_domain, infer_affiliation, parse_suffix_list, Denylists};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{BotPolicy, EventStream, RawIdentity};

#[derive(Debug, thiserror::Error)]
pub enum IdentityError {
    #[error("override file: {0}")]
    Override(#[from] csv::Error),
    #[error("override row {row}: {reason}")]
    BadOverride { row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DevId(pub String);

impl DevId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DevId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DevId {
    fn from(s: &str) -> Self {
        DevId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Affiliation {
    Company(String),
    Independent,
    Unknown,
}

impl Affiliation {
    pub fn is_company(&self) -> bool {
        matches!(self, Affiliation::Company(_))
    }
}

impl fmt::Display for Affiliation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Affiliation::Company(d) => write!(f, "company:{d}"),
            Affiliation::Independent => f.write_str("independent"),
            Affiliation::Unknown => f.write_str("unknown"),
        }
    }
}

impl FromStr for Affiliation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "independent" => Ok(Affiliation::Independent),
            "unknown" => Ok(Affiliation::Unknown),
            _ => match s.strip_prefix("company:") {
                Some(d) if !d.trim().is_empty() => Ok(Affiliation::Company(d.trim().to_lowercase())),
                _ => Err(format!("invalid affiliation {s:?}")),
            },
        }
    }
}

impl Serialize for Affiliation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Affiliation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevIdentity {
    pub id: DevId,
    pub aliases: BTreeSet<RawIdentity>,
    pub affiliation: Affiliation,
    #[serde(default)]
    pub bot: bool,
}

impl DevIdentity {
    pub fn emails(&self) -> impl Iterator<Item = &str> {
        self.aliases.iter().filter_map(|a| a.email.as_deref())
    }
}

/// Raw identity to developer mapping plus the developers themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentityMap {
    by_raw: BTreeMap<RawIdentity, DevId>,
    devs: BTreeMap<DevId, DevIdentity>,
    forced: BTreeMap<DevId, Affiliation>,
    /// Names shared by several emailed developers, left unmerged.
    pub ambiguous: Vec<String>,
}

impl IdentityMap {
    pub fn dev_of(&self, raw: &RawIdentity) -> Option<&DevId> {
        self.by_raw.get(raw)
    }

    pub fn get(&self, id: &DevId) -> Option<&DevIdentity> {
        self.devs.get(id)
    }

    pub fn devs(&self) -> impl Iterator<Item = &DevIdentity> {
        self.devs.values()
    }

    pub fn len(&self) -> usize {
        self.devs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devs.is_empty()
    }

    pub fn is_bot(&self, id: &DevId) -> bool {
        self.devs.get(id).is_some_and(|d| d.bot)
    }

    /// Affiliation pinned by the override file, if any.
    pub fn forced_affiliation(&self, id: &DevId) -> Option<&Affiliation> {
        self.forced.get(id)
    }

    pub fn raw_identities(&self) -> impl Iterator<Item = (&RawIdentity, &DevId)> {
        self.by_raw.iter()
    }

    /// Applies manual corrections; they take precedence over every
    /// automatic rule.
    pub fn apply_overrides(&mut self, overrides: &[Override], denylists: &Denylists) {
        let mut touched = BTreeSet::new();
        for ov in overrides {
            let email = ov.raw_email.as_deref().map(norm_email);
            let login = ov.raw_login.as_deref().map(norm_login);
            let matched: Vec<RawIdentity> = self
                .by_raw
                .keys()
                .filter(|raw| {
                    let e = raw.email.as_deref().map(norm_email);
                    let l = raw.login.as_deref().map(norm_login).or_else(|| {
                        raw.email.as_deref().and_then(noreply_login)
                    });
                    (email.is_some() && e == email) || (login.is_some() && l == login)
                })
                .cloned()
                .collect();
            for raw in matched {
                let old = self.by_raw.insert(raw.clone(), ov.dev_id.clone());
                if let Some(old) = old {
                    if let Some(d) = self.devs.get_mut(&old) {
                        d.aliases.remove(&raw);
                    }
                    touched.insert(old);
                }
                let bot = self.devs.get(&ov.dev_id).is_some_and(|d| d.bot);
                self.devs
                    .entry(ov.dev_id.clone())
                    .or_insert_with(|| DevIdentity {
                        id: ov.dev_id.clone(),
                        aliases: BTreeSet::new(),
                        affiliation: Affiliation::Unknown,
                        bot,
                    })
                    .aliases
                    .insert(raw);
            }
            touched.insert(ov.dev_id.clone());
            if let Some(aff) = &ov.affiliation {
                self.forced.insert(ov.dev_id.clone(), aff.clone());
            }
        }
        self.devs.retain(|_, d| !d.aliases.is_empty());
        for id in touched {
            if let Some(dev) = self.devs.get_mut(&id) {
                dev.affiliation = match self.forced.get(&id) {
                    Some(a) => a.clone(),
                    None => infer_affiliation(dev, denylists),
                };
            }
        }
    }
}

/// One row of the override file `raw_email,raw_login,dev_id,affiliation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub raw_email: Option<String>,
    pub raw_login: Option<String>,
    pub dev_id: DevId,
    pub affiliation: Option<Affiliation>,
}

pub fn read_overrides(text: &str) -> Result<Vec<Override>, IdentityError> {
    #[derive(Deserialize)]
    struct Row {
        raw_email: String,
        raw_login: String,
        dev_id: String,
        affiliation: String,
    }
    let mut out = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let nonempty = |s: String| (!s.is_empty()).then_some(s);
        if row.dev_id.is_empty() {
            return Err(IdentityError::BadOverride { row: i + 1, reason: "empty dev_id".into() });
        }
        let (raw_email, raw_login) = (nonempty(row.raw_email), nonempty(row.raw_login));
        if raw_email.is_none() && raw_login.is_none() {
            return Err(IdentityError::BadOverride { row: i + 1, reason: "needs raw_email or raw_login".into() });
        }
        let affiliation = match nonempty(row.affiliation) {
            Some(a) => Some(a.parse().map_err(|reason| IdentityError::BadOverride { row: i + 1, reason })?),
            None => None,
        };
        out.push(Override {
            raw_email,
            raw_login,
            dev_id: DevId(row.dev_id),
            affiliation,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct ResolveOptions {
    pub denylists: Denylists,
    pub bots: BotPolicy,
}

pub(crate) fn norm_email(e: &str) -> String {
    e.trim().to_lowercase()
}

pub(crate) fn norm_login(l: &str) -> String {
    l.trim().trim_start_matches('@').to_lowercase()
}

pub(crate) fn norm_name(n: &str) -> String {
    n.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// `12345+octocat@users.noreply.github.com` and
/// `octocat@users.noreply.github.com` both name the login `octocat`.
pub(crate) fn noreply_login(email: &str) -> Option<String> {
    let email = norm_email(email);
    let local = email.strip_suffix("@users.noreply.github.com")?;
    let login = local.split_once('+').map_or(local, |(_, l)| l);
    (!login.is_empty()).then(|| login.to_string())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins: roots don't depend on union order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn present(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

/// Canonical key used to derive a stable developer id.
fn alias_key(raw: &RawIdentity) -> String {
    if let Some(e) = present(&raw.email) {
        format!("email:{}", norm_email(e))
    } else if let Some(l) = present(&raw.login) {
        format!("login:{}", norm_login(l))
    } else {
        format!("name:{}", norm_name(present(&raw.name).unwrap_or("")))
    }
}

/// Every raw identity appearing in the stream: actors, thread openers,
/// commit authors, and committers.
pub fn raw_identities(stream: &EventStream) -> BTreeSet<RawIdentity> {
    let mut out = BTreeSet::new();
    for ev in stream.iter() {
        out.insert(ev.actor.clone());
        if let Some(o) = &ev.opener {
            out.insert(o.clone());
        }
        if let Some(c) = &ev.commit {
            out.insert(c.author());
            out.insert(c.committer());
        }
    }
    out.retain(|r| !r.is_empty());
    out
}

pub fn resolve_identities(stream: &EventStream, opts: &ResolveOptions) -> IdentityMap {
    let raws: Vec<RawIdentity> = raw_identities(stream).into_iter().collect();
    let mut uf = UnionFind::new(raws.len());

    let mut by_key: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in raws.iter().enumerate() {
        let mut keys = Vec::new();
        if let Some(e) = present(&raw.email) {
            keys.push(format!("email:{}", norm_email(e)));
            if let Some(l) = noreply_login(e) {
                keys.push(format!("login:{l}"));
            }
        }
        if let Some(l) = present(&raw.login) {
            keys.push(format!("login:{}", norm_login(l)));
        }
        for k in keys {
            match by_key.get(&k) {
                Some(&j) => uf.union(i, j),
                None => {
                    by_key.insert(k, i);
                }
            }
        }
    }

    // Name rule, evaluated on the email/login components.
    let mut by_name: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, raw) in raws.iter().enumerate() {
        if let Some(n) = present(&raw.name) {
            let root = uf.find(i);
            by_name.entry(norm_name(n)).or_default().insert(root);
        }
    }
    let mut emailed_roots = BTreeSet::new();
    for (i, raw) in raws.iter().enumerate() {
        if present(&raw.email).is_some() {
            emailed_roots.insert(uf.find(i));
        }
    }
    let mut ambiguous = Vec::new();
    for (name, roots) in &by_name {
        if roots.len() < 2 {
            continue;
        }
        let emailed = roots.iter().filter(|r| emailed_roots.contains(r)).count();
        if emailed <= 1 {
            let mut it = roots.iter();
            let first = *it.next().expect("non-empty");
            for &r in it {
                uf.union(first, r);
            }
        } else {
            ambiguous.push(name.clone());
        }
    }

    let mut components: BTreeMap<usize, BTreeSet<RawIdentity>> = BTreeMap::new();
    for (i, raw) in raws.iter().enumerate() {
        components.entry(uf.find(i)).or_default().insert(raw.clone());
    }

    let mut map = IdentityMap {
        ambiguous,
        ..IdentityMap::default()
    };
    for aliases in components.into_values() {
        let key = aliases.iter().map(alias_key).min().expect("non-empty component");
        let digest = Sha256::digest(key.as_bytes());
        let id = DevId(format!("dev-{}", &hex::encode(digest)[..12]));
        let bot = aliases.iter().any(|a| opts.bots.is_bot(a));
        for a in &aliases {
            map.by_raw.insert(a.clone(), id.clone());
        }
        let mut dev = DevIdentity {
            id: id.clone(),
            aliases,
            affiliation: Affiliation::Unknown,
            bot,
        };
        dev.affiliation = infer_affiliation(&dev, &opts.denylists);
        map.devs.insert(id, dev);
    }
    map
}
