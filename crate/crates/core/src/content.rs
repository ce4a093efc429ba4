//! Keyword coverage of a candidate page: found/nfound counts, the majority
//! filter and the content-priority feature.

use crate::error::{Error, Result};
use crate::textprep::{Query, WebDictionary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentStats {
    pub doc_id: String,
    /// Query words present in the page's dictionary.
    pub found: usize,
    /// Query words absent from it.
    pub nfound: usize,
}

impl ContentStats {
    pub fn total(&self) -> usize {
        self.found + self.nfound
    }
}

pub fn count_matches(query: &Query, dict: &WebDictionary) -> ContentStats {
    let found = query.words.iter().filter(|w| dict.contains(w)).count();
    ContentStats {
        doc_id: dict.doc_id.clone(),
        found,
        nfound: query.words.len() - found,
    }
}

/// Drops candidates where more query words are missing than present.
/// Ties are kept.
pub fn filter_candidates(stats: Vec<ContentStats>) -> Vec<ContentStats> {
    stats.into_iter().filter(|s| s.nfound <= s.found).collect()
}

/// Fraction of query words the page contains.
pub fn content_score(stats: &ContentStats) -> Result<f64> {
    match stats.total() {
        0 => Err(Error::contract(format!(
            "content score of {:?} needs at least one query word",
            stats.doc_id
        ))),
        n => Ok(stats.found as f64 / n as f64),
    }
}
