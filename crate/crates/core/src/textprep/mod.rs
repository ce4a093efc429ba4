//! Query and document preprocessing: tokenizing, stemming, keyword length
//! bounds and per-document web dictionaries.

mod porter;

use std::collections::BTreeSet;

use crate::corpus::WebDocument;
use crate::error::{Error, Result};

pub use self::porter::stem;

/// Splits on every run of characters that are not ASCII letters or digits,
/// lowercases, and keeps the first occurrence of each token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// A preprocessed user query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub raw: String,
    /// Distinct stems in first-occurrence order.
    pub words: Vec<String>,
    /// Length of the shortest stem.
    pub min_len: usize,
    /// Length of the longest stem; caps web dictionaries.
    pub max_len: usize,
}

impl Query {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn parse_query(raw: &str) -> Result<Query> {
    let mut words: Vec<String> = Vec::new();
    for token in tokenize(raw) {
        let s = stem(&token);
        if !words.contains(&s) {
            words.push(s);
        }
    }
    if words.is_empty() {
        return Err(Error::EmptyQuery);
    }

    let mut min_len = usize::MAX;
    let mut max_len = 0;
    for w in &words {
        let n = w.len();
        if n < min_len {
            min_len = n;
        }
        if n > max_len {
            max_len = n;
        }
    }
    Ok(Query {
        raw: raw.to_string(),
        words,
        min_len,
        max_len,
    })
}

/// Distinct stems of a document's title and body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebDictionary {
    pub doc_id: String,
    pub stems: BTreeSet<String>,
}

impl WebDictionary {
    pub fn contains(&self, word: &str) -> bool {
        self.stems.contains(word)
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty()
    }
}

/// Every distinct stem in the document's title and body.
pub fn document_stems(doc: &WebDocument) -> BTreeSet<String> {
    tokenize(&doc.title)
        .into_iter()
        .chain(tokenize(&doc.body))
        .map(|t| stem(&t))
        .collect()
}

/// Keeps the stems no longer than `max_len`.
pub fn cap_dictionary(doc_id: &str, stems: &BTreeSet<String>, max_len: usize) -> WebDictionary {
    WebDictionary {
        doc_id: doc_id.to_string(),
        stems: stems
            .iter()
            .filter(|s| s.len() <= max_len)
            .cloned()
            .collect(),
    }
}

pub fn build_dictionary(doc: &WebDocument, max_len: usize) -> WebDictionary {
    cap_dictionary(&doc.doc_id, &document_stems(doc), max_len)
}
