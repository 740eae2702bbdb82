//! Parses a git history and counts commits per committer.
//!
//!     cargo run --example parse_git_log -- /path/to/repo org/name
//!
//! Without arguments a synthetic log is used.

use std::collections::BTreeMap;
use std::process::Command;

use commitgate::ingest::{parse_git_log, write_git_log, RepoId, GIT_LOG_FORMAT};
use commitgate::synthetic::community;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (log, repo) = match args.as_slice() {
        [path, repo, ..] => {
            let out = Command::new("git").arg("-C").arg(path).arg("log").args(GIT_LOG_FORMAT).output()?;
            if !out.status.success() {
                return Err(String::from_utf8_lossy(&out.stderr).into_owned().into());
            }
            (String::from_utf8(out.stdout)?, repo.parse::<RepoId>()?)
        }
        _ => (write_git_log(&community(1, 20, 12).focal_commits), RepoId::new("acme", "widget")),
    };
    let commits = parse_git_log(&log, &repo)?;
    println!("{} commits in {repo}", commits.len());

    let mut by_committer: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &commits {
        *by_committer.entry(&c.committer_email).or_default() += 1;
    }
    let mut ranked: Vec<_> = by_committer.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    for (email, n) in ranked.iter().take(10) {
        println!("{n:>6}  {email}");
    }
    if let (Some(first), Some(last)) = (commits.iter().map(|c| c.author_time).min(), commits.iter().map(|c| c.author_time).max()) {
        println!("authored between {first} and {last}");
    }
    Ok(())
}
