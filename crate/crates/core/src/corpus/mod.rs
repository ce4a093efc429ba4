//! Catalog and web-log data model.
//!
//! A catalog is a list of [`WebDocument`]s labelled with a two-level
//! taxonomy. Logs are streams of [`LogRecord`]s which [`sessionize`] groups
//! into ordered [`Session`]s. The [`synth`] submodule generates seeded
//! catalogs and logs with a planted per-user preference.

mod log;
mod session;
pub mod synth;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::log::{load_log, parse_log, save_log, write_log, IngestStats};
pub use self::session::{sessionize, Session};

/// A sellable catalog page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebDocument {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub category: String,
    pub subcategory: String,
    pub url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    View,
    Click,
    AddToCart,
    Purchase,
}

impl EventType {
    pub const ALL: [EventType; 4] = [
        EventType::View,
        EventType::Click,
        EventType::AddToCart,
        EventType::Purchase,
    ];

    /// Relevance weight of the event, monotone in engagement.
    pub fn weight(self) -> f64 {
        match self {
            EventType::View => 0.25,
            EventType::Click => 0.5,
            EventType::AddToCart => 0.75,
            EventType::Purchase => 1.0,
        }
    }

    /// Anything stronger than a plain view.
    pub fn is_engagement(self) -> bool {
        self != EventType::View
    }
}

/// One user event from the web log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    #[serde(rename = "ts")]
    pub timestamp: i64,
    #[serde(rename = "user")]
    pub user_id: String,
    #[serde(rename = "session")]
    pub session_id: String,
    pub query: String,
    #[serde(rename = "doc")]
    pub doc_id: String,
    #[serde(rename = "dwell")]
    pub dwell_seconds: f64,
    #[serde(rename = "event")]
    pub event_type: EventType,
}

/// A top-level category and its subcategories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub subcategories: Vec<String>,
}

/// Two-level category tree. Subcategory names are unique across the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub categories: Vec<Category>,
}

const BOOK_TAXONOMY: [(&str, [&str; 6]); 5] = [
    (
        "computing",
        [
            "artificial-intelligence",
            "data-mining",
            "databases",
            "networking",
            "programming",
            "security",
        ],
    ),
    (
        "business",
        [
            "accounting",
            "economics",
            "entrepreneurship",
            "finance",
            "management",
            "marketing",
        ],
    ),
    (
        "science",
        [
            "astronomy",
            "biology",
            "chemistry",
            "geology",
            "mathematics",
            "physics",
        ],
    ),
    (
        "humanities",
        [
            "art",
            "history",
            "linguistics",
            "music",
            "philosophy",
            "religion",
        ],
    ),
    (
        "fiction",
        [
            "fantasy",
            "mystery",
            "poetry",
            "romance",
            "science-fiction",
            "thriller",
        ],
    ),
];

impl Taxonomy {
    /// The bookstore tree: 5 categories with 6 subcategories each.
    pub fn books() -> Self {
        Taxonomy {
            categories: BOOK_TAXONOMY
                .iter()
                .map(|(name, subs)| Category {
                    name: name.to_string(),
                    subcategories: subs.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    /// All `(category, subcategory)` pairs in tree order.
    pub fn leaves(&self) -> impl Iterator<Item = (&str, &str)> {
        self.categories.iter().flat_map(|c| {
            c.subcategories
                .iter()
                .map(move |s| (c.name.as_str(), s.as_str()))
        })
    }

    pub fn parent_of(&self, subcategory: &str) -> Option<&str> {
        self.leaves()
            .find(|(_, s)| *s == subcategory)
            .map(|(c, _)| c)
    }

    pub fn contains(&self, category: &str, subcategory: &str) -> bool {
        self.leaves()
            .any(|(c, s)| c == category && s == subcategory)
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Taxonomy::books()
    }
}

/// Checks catalog invariants: unique ids, non-empty bodies, labels from `taxonomy`.
pub fn validate_catalog(docs: &[WebDocument], taxonomy: &Taxonomy) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for doc in docs {
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate document id {:?}",
                doc.doc_id
            )));
        }
        if doc.body.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "document {:?} has an empty body",
                doc.doc_id
            )));
        }
        if !taxonomy.contains(&doc.category, &doc.subcategory) {
            return Err(Error::InvalidInput(format!(
                "document {:?} is labelled {}/{} which is not in the taxonomy",
                doc.doc_id, doc.category, doc.subcategory
            )));
        }
    }
    Ok(())
}

pub fn load_catalog(path: &Path) -> Result<Vec<WebDocument>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        reason: e.to_string(),
    })
}

pub fn save_catalog(docs: &[WebDocument], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, docs).map_err(|e| Error::io(path, e.into()))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
