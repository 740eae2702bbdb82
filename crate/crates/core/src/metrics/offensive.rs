//! Offensive-comment scoring behind a plug-in trait.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreError(pub String);

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ScoreError {}

/// Classifies a comment as offensive (true) or not. Implementations must be
/// deterministic.
pub trait OffensiveScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<bool, ScoreError>;
}

const DEFAULT_LEXICON: &[&str] = &[
    "asshole", "bastard", "bitch", "bullshit", "crap", "damn", "dickhead", "dumbass", "fuck",
    "fucked", "fucking", "idiot", "idiotic", "imbecile", "jackass", "moron", "moronic", "piss off",
    "retard", "retarded", "screw you", "shit", "shitty", "shut up", "stfu", "stupid", "wtf",
];

/// Whole-word, case-insensitive lexicon matcher. Multi-word entries match
/// consecutive words.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    terms: BTreeSet<Vec<String>>,
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

impl LexiconScorer {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            terms: terms.into_iter().map(|t| words(t.as_ref())).filter(|t| !t.is_empty()).collect(),
        }
    }

    /// One term per line; `#` starts a comment.
    pub fn from_lexicon_text(text: &str) -> Self {
        Self::new(text.lines().map(|l| l.split('#').next().unwrap_or("").trim()))
    }
}

impl Default for LexiconScorer {
    fn default() -> Self {
        Self::new(DEFAULT_LEXICON)
    }
}

impl OffensiveScorer for LexiconScorer {
    fn score(&self, text: &str) -> Result<bool, ScoreError> {
        let w = words(text);
        Ok(self.terms.iter().any(|t| w.windows(t.len()).any(|win| win == t.as_slice())))
    }
}

/// Number of comments the scorer flags. A scorer error counts as 0.
pub fn score_offensive<'a, I>(comments: I, scorer: &dyn OffensiveScorer) -> usize
where
    I: IntoIterator<Item = &'a str>,
{
    comments.into_iter().filter(|c| score_one(c, scorer)).count()
}

pub(crate) fn score_one(text: &str, scorer: &dyn OffensiveScorer) -> bool {
    match scorer.score(text) {
        Ok(flag) => flag,
        Err(e) => {
            log::warn!("offensive scorer failed, scoring comment as 0: {e}");
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Failing;
    impl OffensiveScorer for Failing {
        fn score(&self, _: &str) -> Result<bool, ScoreError> {
            Err(ScoreError("model unavailable".into()))
        }
    }

    struct LongComments;
    impl OffensiveScorer for LongComments {
        fn score(&self, text: &str) -> Result<bool, ScoreError> {
            Ok(text.len() > 20)
        }
    }

    #[test]
    fn lexicon_rules() {
        let s = LexiconScorer::default();
        assert!(!s.score("").unwrap());
        assert!(s.score("this is STUPID.").unwrap());
        assert!(!s.score("classic assumption").unwrap(), "no substring matches");
        assert!(s.score("please just shut   up").unwrap());
        assert!(!s.score("shut the door, up next").unwrap());
    }

    #[test]
    fn plug_in_contract() {
        let comments = ["thanks!", "what an idiot move, honestly", "lgtm"];
        let lex = LexiconScorer::default();
        assert_eq!(score_offensive(comments, &lex), 1);
        assert_eq!(score_offensive(comments, &lex), 1);
        assert_eq!(score_offensive(comments, &LongComments), 1);
        assert_eq!(score_offensive(["a much longer comment here", "idiot"], &LongComments), 1);
        assert_eq!(score_offensive(["a much longer comment here", "idiot"], &lex), 1);
        assert_eq!(score_offensive(comments, &Failing), 0);
    }

    #[test]
    fn custom_lexicon() {
        let s = LexiconScorer::from_lexicon_text("# custom\nbikeshed\nnot again\n");
        assert!(s.score("Bikeshed!").unwrap());
        assert!(s.score("oh not again").unwrap());
        assert!(!s.score("stupid").unwrap());
    }
}
