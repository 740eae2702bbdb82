//! Reader and writer for the unit-separated git log format.
//!
//! Each record is produced by
//! `git log --pretty=format:%H%x1f%an%x1f%ae%x1f%aI%x1f%cn%x1f%ce%x1f%cI%x1f%s%x1e --name-status`:
//! seven (optionally eight, with the subject line) fields joined by `0x1F`,
//! terminated by `0x1E`, followed by the record's name-status file lines.

use std::collections::{BTreeSet, HashSet};

use super::{utc_z, CommitRecord, IngestError, RepoId};

const UNIT_SEP: char = '\u{1f}';
const RECORD_SEP: char = '\u{1e}';

/// Arguments to pass to `git log` to produce input for [`parse_git_log`].
pub const GIT_LOG_FORMAT: [&str; 2] = [
    "--pretty=format:%H%x1f%an%x1f%ae%x1f%aI%x1f%cn%x1f%ce%x1f%cI%x1f%s%x1e",
    "--name-status",
];

const FIELD_NAMES: [&str; 8] = [
    "hash",
    "author_name",
    "author_email",
    "author_time",
    "committer_name",
    "committer_email",
    "committer_time",
    "message",
];

/// Parses a git log stream into commit records, in stream order.
pub fn parse_git_log(stream: &str, repo: &RepoId) -> Result<Vec<CommitRecord>, IngestError> {
    let mut chunks = Vec::new();
    let mut offset = 0;
    for chunk in stream.split(RECORD_SEP) {
        chunks.push((offset, chunk));
        offset += chunk.len() + RECORD_SEP.len_utf8();
    }

    // chunk[k] holds the file lines of record k-1 followed by the header of
    // record k; the final chunk only carries file lines.
    let mut records: Vec<CommitRecord> = Vec::new();
    let mut seen = HashSet::new();
    let last = chunks.len() - 1;
    for (k, &(offset, chunk)) in chunks.iter().enumerate() {
        let (files_part, header) = if k == last {
            (chunk, None)
        } else {
            let trimmed = chunk.trim_end_matches(['\n', '\r']);
            match trimmed.rfind('\n') {
                Some(pos) => (&trimmed[..pos], Some((offset + pos + 1, &trimmed[pos + 1..]))),
                None => ("", Some((offset + (chunk.len() - chunk.trim_start().len()), trimmed.trim_start()))),
            }
        };

        if k > 0 {
            let index = k - 1;
            let files = parse_files(files_part, index, offset)?;
            records[index].files_touched = files;
        } else if !files_part.trim().is_empty() {
            return Err(IngestError::MalformedRecord {
                index: 0,
                offset,
                reason: "unexpected text before the first record".into(),
            });
        }

        if let Some((header_offset, header)) = header {
            let index = k;
            let record = parse_header(header, index, header_offset, repo)?;
            if !seen.insert(record.hash.clone()) {
                return Err(IngestError::MalformedRecord {
                    index,
                    offset: header_offset,
                    reason: format!("duplicate commit hash {}", record.hash),
                });
            }
            records.push(record);
        }
    }
    Ok(records)
}

fn parse_header(
    header: &str,
    index: usize,
    offset: usize,
    repo: &RepoId,
) -> Result<CommitRecord, IngestError> {
    let fields: Vec<&str> = header.split(UNIT_SEP).collect();
    if fields.len() < 7 {
        return Err(IngestError::MissingField {
            index,
            offset,
            field: FIELD_NAMES[fields.len()],
        });
    }
    if fields.len() > 8 {
        return Err(IngestError::MalformedRecord {
            index,
            offset,
            reason: format!("expected 7 or 8 fields, found {}", fields.len()),
        });
    }
    let hash = fields[0].trim();
    if hash.len() != 40 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(IngestError::MalformedRecord {
            index,
            offset,
            reason: format!("invalid commit hash {hash:?}"),
        });
    }
    let time = |i: usize| {
        utc_z::parse(fields[i].trim()).map_err(|_| IngestError::InvalidTimestamp {
            index,
            field: FIELD_NAMES[i],
            value: fields[i].to_string(),
        })
    };
    Ok(CommitRecord {
        hash: hash.to_ascii_lowercase(),
        author_name: fields[1].to_string(),
        author_email: fields[2].to_string(),
        author_time: time(3)?,
        committer_name: fields[4].to_string(),
        committer_email: fields[5].to_string(),
        committer_time: time(6)?,
        repo: repo.clone(),
        files_touched: BTreeSet::new(),
        message: fields.get(7).map(|s| s.to_string()).unwrap_or_default(),
    })
}

fn parse_files(block: &str, index: usize, offset: usize) -> Result<BTreeSet<String>, IngestError> {
    let mut files = BTreeSet::new();
    for line in block.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let status = parts.next().unwrap_or_default();
        let paths: Vec<&str> = parts.collect();
        let valid_status = status
            .chars()
            .next()
            .is_some_and(|c| "ACDMRTUXB".contains(c));
        // Renames and copies list source then destination; keep the destination.
        match paths.last() {
            Some(path) if valid_status && !path.is_empty() => {
                files.insert(path.to_string());
            }
            _ => {
                return Err(IngestError::MalformedRecord {
                    index,
                    offset,
                    reason: format!("bad name-status line {line:?}"),
                })
            }
        }
    }
    Ok(files)
}

/// Serializes records into the same format [`parse_git_log`] reads.
/// Every file is written as a modification; messages are expected to be
/// single-line subjects.
pub fn write_git_log(records: &[CommitRecord]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let fields = [
            r.hash.clone(),
            r.author_name.clone(),
            r.author_email.clone(),
            r.author_time.to_rfc3339(),
            r.committer_name.clone(),
            r.committer_email.clone(),
            r.committer_time.to_rfc3339(),
            r.message.clone(),
        ];
        out.push_str(&fields.join(&UNIT_SEP.to_string()));
        out.push(RECORD_SEP);
        out.push('\n');
        for f in &r.files_touched {
            out.push_str("M\t");
            out.push_str(f);
            out.push('\n');
        }
    }
    out
}
