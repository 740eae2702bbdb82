//! Merges git and platform identities into developers and infers their
//! affiliation from email domains.

use chrono::{TimeZone, Utc};

use commitgate::identity::{resolve_identities, ResolveOptions};
use commitgate::ingest::{normalize, CommitRecord, Event, EventKind, NormalizeOptions, RawIdentity, RepoId};

fn main() {
    let repo = RepoId::new("acme", "widget");
    let t = |d: u32| Utc.with_ymd_and_hms(2022, 3, d, 10, 0, 0).unwrap();
    let commit = |hash: &str, name: &str, email: &str, day: u32| CommitRecord {
        hash: hash.into(),
        author_name: name.into(),
        author_email: email.into(),
        author_time: t(day),
        committer_name: "Maintainer".into(),
        committer_email: "maint@acme.io".into(),
        committer_time: t(day),
        repo: repo.clone(),
        files_touched: Default::default(),
        message: String::new(),
    };
    let commits = vec![
        commit("a1", "Ada Lovelace", "ada@analytical.com", 1),
        commit("a2", "Ada Lovelace", "ADA@analytical.com ", 2),
        commit("a3", "ada", "1234+adal@users.noreply.github.com", 3),
        commit("b1", "Bob", "bob@gmail.com", 4),
        commit("b2", "Bob", "bob@uni.edu", 5),
    ];
    let events = vec![
        Event::new(EventKind::IssueOpened, RawIdentity::login("adal"), t(6), repo.clone(), "acme/widget#1"),
        Event::new(EventKind::IssueComment, RawIdentity::login("dependabot[bot]"), t(7), repo.clone(), "acme/widget#1"),
    ];
    let stream = normalize(commits, events, &NormalizeOptions::default());
    let ids = resolve_identities(&stream, &ResolveOptions::default());

    for dev in ids.devs() {
        let aliases: Vec<String> = dev
            .aliases
            .iter()
            .map(|a| [a.name.as_deref(), a.email.as_deref(), a.login.as_deref()].into_iter().flatten().collect::<Vec<_>>().join(" / "))
            .collect();
        println!("{}  bot={} affiliation={:?}", dev.id, dev.bot, dev.affiliation);
        for a in aliases {
            println!("    {a}");
        }
    }
    if !ids.ambiguous.is_empty() {
        println!("left unmerged: {:?}", ids.ambiguous);
    }
}
