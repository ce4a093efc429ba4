//! Session semantics: longest-common-subsequence matching of the current
//! query against a user's past queries, and a taxonomy affinity score.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Session, Taxonomy, WebDocument};
use crate::error::{Error, Result};
use crate::textprep::{parse_query, Query};

/// Length of the longest common subsequence of `a` and `b`.
///
/// Row-by-row evaluation of the table `L[i][j]`, where `L[i][j]` is zero on
/// the borders, `L[i-1][j-1] + 1` when `a[i] == b[j]` and
/// `max(L[i-1][j], L[i][j-1])` otherwise.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// One past query of a user and the subcategory they engaged with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub tokens: Vec<String>,
    pub subcategory: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct HistoryLine {
    user: String,
    tokens: Vec<String>,
    subcategory: Option<String>,
}

/// user_id → past query token sequences, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserHistoryDb {
    users: BTreeMap<String, Vec<HistoryEntry>>,
}

impl UserHistoryDb {
    pub fn new() -> Self {
        UserHistoryDb::default()
    }

    /// Appends an entry. Empty token sequences are ignored.
    pub fn record(&mut self, user_id: &str, tokens: Vec<String>, subcategory: Option<String>) {
        if tokens.is_empty() {
            return;
        }
        self.users
            .entry(user_id.to_string())
            .or_default()
            .push(HistoryEntry {
                tokens,
                subcategory,
            });
    }

    /// Records `session` if it has a query and at least one engagement
    /// (click or stronger). The label is the subcategory of the last engaged
    /// page.
    pub fn record_session(&mut self, session: &Session, subcategory_of: &HashMap<&str, &str>) {
        let Some(query) = session.query().and_then(|q| parse_query(q).ok()) else {
            return;
        };
        let engaged = session
            .records
            .iter()
            .rev()
            .filter(|r| r.event_type.is_engagement())
            .find_map(|r| subcategory_of.get(r.doc_id.as_str()));
        if let Some(sub) = engaged {
            self.record(&session.user_id, query.words, Some(sub.to_string()));
        }
    }

    pub fn from_sessions(sessions: &[Session], catalog: &[WebDocument]) -> Self {
        let subcategory_of: HashMap<&str, &str> = catalog
            .iter()
            .map(|d| (d.doc_id.as_str(), d.subcategory.as_str()))
            .collect();
        let mut db = UserHistoryDb::new();
        for s in sessions {
            db.record_session(s, &subcategory_of);
        }
        db
    }

    pub fn entries(&self, user_id: &str) -> &[HistoryEntry] {
        self.users.get(user_id).map_or(&[], Vec::as_slice)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut out = BufWriter::new(file);
            for (user, entries) in &self.users {
                for e in entries {
                    let line = HistoryLine {
                        user: user.clone(),
                        tokens: e.tokens.clone(),
                        subcategory: e.subcategory.clone(),
                    };
                    serde_json::to_writer(&mut out, &line)
                        .map_err(|e| Error::io(&tmp, e.into()))?;
                    out.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
                }
            }
            out.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut db = UserHistoryDb::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: HistoryLine = serde_json::from_str(&line).map_err(|e| Error::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            if rec.tokens.is_empty() {
                return Err(Error::Corrupt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: "empty token sequence".into(),
                });
            }
            db.record(&rec.user, rec.tokens, rec.subcategory);
        }
        Ok(db)
    }
}

/// Best history match for a query.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionMatch {
    pub best_entry: Vec<String>,
    pub lcs_len: usize,
    /// `lcs_len / max(|query|, |best_entry|)`.
    pub similarity: f64,
    pub matched_subcategory: Option<String>,
}

impl SessionMatch {
    pub fn none() -> Self {
        SessionMatch {
            best_entry: Vec::new(),
            lcs_len: 0,
            similarity: 0.0,
            matched_subcategory: None,
        }
    }
}

/// Compares the query with every history entry of the user and keeps the
/// most similar one; among equals the most recent wins.
pub fn match_session(query: &Query, user_id: &str, db: &UserHistoryDb) -> SessionMatch {
    let mut best = SessionMatch::none();
    for entry in db.entries(user_id) {
        let lcs = lcs_length(&query.words, &entry.tokens);
        let denom = query.words.len().max(entry.tokens.len());
        let similarity = if denom == 0 {
            0.0
        } else {
            lcs as f64 / denom as f64
        };
        if similarity > 0.0 && similarity >= best.similarity {
            best = SessionMatch {
                best_entry: entry.tokens.clone(),
                lcs_len: lcs,
                similarity,
                matched_subcategory: entry.subcategory.clone(),
            };
        }
    }
    best
}

/// 1.0 for the same subcategory, 0.5 for a sibling under the same top
/// category, 0.0 otherwise.
pub fn taxonomy_affinity(
    candidate: &WebDocument,
    matched: Option<&str>,
    taxonomy: &Taxonomy,
) -> f64 {
    match matched {
        Some(sub) if sub == candidate.subcategory => 1.0,
        Some(sub) if taxonomy.parent_of(sub) == Some(candidate.category.as_str()) => 0.5,
        _ => 0.0,
    }
}

pub fn semantic_score(candidate: &WebDocument, m: &SessionMatch, taxonomy: &Taxonomy) -> f64 {
    m.similarity * taxonomy_affinity(candidate, m.matched_subcategory.as_deref(), taxonomy)
}
