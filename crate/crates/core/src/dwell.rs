//! Per-page dwell statistics and the time-priority feature.
//!
//! Each page keeps a running pairwise average of the dwell times observed on
//! it: the first observation is taken as is, every later one is averaged
//! with the current value.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LogRecord;
use crate::error::{Error, Result};
use crate::textprep::{stem, tokenize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeEntry {
    #[serde(rename = "doc")]
    pub doc_id: String,
    pub avg_dwell: f64,
    #[serde(rename = "ts")]
    pub last_updated: i64,
    pub keywords: BTreeSet<String>,
}

/// doc_id → [`TimeEntry`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeDb {
    entries: BTreeMap<String, TimeEntry>,
}

/// Folds one more observation into a running average. A zero average is
/// treated as "no observation yet".
pub fn fold_dwell(avg: f64, t: f64) -> f64 {
    if avg == 0.0 {
        t
    } else {
        (t + avg) / 2.0
    }
}

impl TimeDb {
    pub fn new() -> Self {
        TimeDb::default()
    }

    /// Replays `records` in order through [`TimeDb::update_dwell`], tagging
    /// each visit with the stems of its query.
    pub fn from_records<'a, I>(records: I) -> Self
    where
        I: IntoIterator<Item = &'a LogRecord>,
    {
        let mut db = TimeDb::new();
        for r in records {
            let keywords = tokenize(&r.query).into_iter().map(|t| stem(&t));
            // Ingestion already rejects negative dwell.
            let _ = db.update_dwell(&r.doc_id, r.dwell_seconds, r.timestamp, keywords);
        }
        db
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&TimeEntry> {
        self.entries.get(doc_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &TimeEntry> {
        self.entries.values()
    }

    /// Average dwell of a page; unseen pages count as zero.
    pub fn avg_dwell(&self, doc_id: &str) -> f64 {
        self.entries.get(doc_id).map_or(0.0, |e| e.avg_dwell)
    }

    pub fn update_dwell<I, S>(&mut self, doc_id: &str, t_p: f64, at: i64, keywords: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if !(t_p >= 0.0 && t_p.is_finite()) {
            return Err(Error::contract(format!(
                "dwell time for {doc_id:?} must be a non-negative number, got {t_p}"
            )));
        }
        let entry = self
            .entries
            .entry(doc_id.to_string())
            .or_insert_with(|| TimeEntry {
                doc_id: doc_id.to_string(),
                avg_dwell: 0.0,
                last_updated: at,
                keywords: BTreeSet::new(),
            });
        entry.avg_dwell = fold_dwell(entry.avg_dwell, t_p);
        entry.last_updated = at;
        entry.keywords.extend(keywords.into_iter().map(Into::into));
        Ok(())
    }

    /// Writes one JSON object per entry, replacing `path` atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut out = BufWriter::new(file);
            for entry in self.entries.values() {
                serde_json::to_writer(&mut out, entry).map_err(|e| Error::io(&tmp, e.into()))?;
                out.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
            }
            out.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Loads a store written by [`TimeDb::save`]. Any bad line fails the
    /// whole load.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut db = TimeDb::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| Error::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let entry: TimeEntry =
                serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            if !(entry.avg_dwell >= 0.0 && entry.avg_dwell.is_finite()) {
                return Err(corrupt(format!(
                    "negative average dwell {}",
                    entry.avg_dwell
                )));
            }
            if db.entries.contains_key(&entry.doc_id) {
                return Err(corrupt(format!("duplicate entry for {:?}", entry.doc_id)));
            }
            db.entries.insert(entry.doc_id.clone(), entry);
        }
        Ok(db)
    }
}

/// Min–max normalised dwell of every candidate, in input order.
///
/// If all candidates share one value every score is 0.5.
pub fn time_scores<S: AsRef<str>>(candidates: &[S], db: &TimeDb) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::contract(
            "time score needs a non-empty candidate set",
        ));
    }
    let values: Vec<f64> = candidates
        .iter()
        .map(|c| db.avg_dwell(c.as_ref()))
        .collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![0.5; values.len()]);
    }
    Ok(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

pub fn time_score<S: AsRef<str>>(doc_id: &str, candidates: &[S], db: &TimeDb) -> Result<f64> {
    let at = candidates
        .iter()
        .position(|c| c.as_ref() == doc_id)
        .ok_or_else(|| Error::contract(format!("{doc_id:?} is not among the candidates")))?;
    Ok(time_scores(candidates, db)?[at])
}
