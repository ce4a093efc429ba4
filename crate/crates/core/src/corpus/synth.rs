//! Seeded synthetic catalogs and transaction logs.
//!
//! Every user gets a planted favourite subcategory and a small wishlist of
//! books from it. Sessions mostly browse the favourite subcategory, queries
//! are noisy samples of title words, dwell is longer on favourite pages and
//! purchases concentrate on the wishlist. The planted labels are returned as
//! [`GroundTruth`] so evaluation can be checked against them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EventType, LogRecord, Taxonomy, WebDocument};
use crate::error::{Error, Result};
use crate::textprep::{stem, tokenize};

/// user_id → planted subcategory.
pub type GroundTruth = BTreeMap<String, String>;

/// Generated log plus the preference labels it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLog {
    pub records: Vec<LogRecord>,
    pub ground_truth: GroundTruth,
}

const TOPICAL_WORDS_PER_SUBCATEGORY: usize = 10;
const WISHLIST_SIZE: usize = 8;
const BASE_TIMESTAMP: i64 = 1_700_000_000;

const GENERIC_WORDS: [&str; 24] = [
    "guide",
    "handbook",
    "introduction",
    "complete",
    "practical",
    "modern",
    "essential",
    "companion",
    "primer",
    "advanced",
    "principles",
    "foundations",
    "collected",
    "illustrated",
    "concise",
    "classic",
    "annotated",
    "selected",
    "workbook",
    "reader",
    "edition",
    "volume",
    "lessons",
    "notes",
];

const ONSETS: [&str; 14] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 5] = ["n", "r", "l", "k", "m"];

/// Per-subcategory topical vocabularies whose stems are pairwise distinct
/// and disjoint from the generic words and the subcategory names.
fn topical_vocabulary(rng: &mut ChaCha8Rng, subcategories: &[&str]) -> Vec<Vec<String>> {
    let mut used: HashSet<String> = GENERIC_WORDS.iter().map(|w| stem(w)).collect();
    for sub in subcategories {
        used.extend(tokenize(sub).iter().map(|w| stem(w)));
    }
    subcategories
        .iter()
        .map(|_| {
            let mut pool = Vec::with_capacity(TOPICAL_WORDS_PER_SUBCATEGORY);
            while pool.len() < TOPICAL_WORDS_PER_SUBCATEGORY {
                let syllables = rng.gen_range(2..=3);
                let mut word = String::new();
                for _ in 0..syllables {
                    word.push_str(ONSETS.choose(rng).unwrap());
                    word.push_str(VOWELS.choose(rng).unwrap());
                }
                word.push_str(CODAS.choose(rng).unwrap());
                if used.insert(stem(&word)) {
                    pool.push(word);
                }
            }
            pool
        })
        .collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// Generates `n_books` documents spread round-robin over the taxonomy's
/// subcategories. Identical seeds give identical catalogs.
pub fn generate_catalog(seed: u64, n_books: usize, taxonomy: &Taxonomy) -> Vec<WebDocument> {
    let leaves: Vec<(&str, &str)> = taxonomy.leaves().collect();
    if n_books == 0 || leaves.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subs: Vec<&str> = leaves.iter().map(|(_, s)| *s).collect();
    let vocab = topical_vocabulary(&mut rng, &subs);

    (0..n_books)
        .map(|i| {
            let leaf = i % leaves.len();
            let (category, subcategory) = leaves[leaf];
            let pool = &vocab[leaf];
            let title_words: Vec<&String> = pool.choose_multiple(&mut rng, 2).collect();
            let generic = GENERIC_WORDS.choose(&mut rng).unwrap();
            let title = format!(
                "{} {} {}",
                capitalize(title_words[0]),
                capitalize(title_words[1]),
                capitalize(generic)
            );

            let topical: Vec<&str> = pool
                .choose_multiple(&mut rng, 7)
                .map(String::as_str)
                .collect();
            let other = loop {
                let j = rng.gen_range(0..leaves.len());
                if j != leaf || leaves.len() == 1 {
                    break j;
                }
            };
            let noise: Vec<&str> = vocab[other]
                .choose_multiple(&mut rng, 2)
                .map(String::as_str)
                .collect();
            let body = format!(
                "A {} {} book covering {}. Includes notes on {} and {}.",
                GENERIC_WORDS.choose(&mut rng).unwrap(),
                subcategory.replace('-', " "),
                topical.join(" "),
                noise[0],
                noise[1],
            );

            let doc_id = format!("b{:05}", i + 1);
            WebDocument {
                url: format!("https://books.example.com/{subcategory}/{doc_id}"),
                doc_id,
                title,
                body,
                category: category.to_string(),
                subcategory: subcategory.to_string(),
            }
        })
        .collect()
}

struct SynthUser {
    id: String,
    favourite: usize,
    wishlist: Vec<usize>,
    clock: i64,
    purchases: usize,
    off_favourite_purchases: usize,
}

fn pick_event(rng: &mut ChaCha8Rng, probs: [f64; 4]) -> EventType {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (p, e) in probs.iter().zip(EventType::ALL) {
        acc += p;
        if x < acc {
            return e;
        }
    }
    EventType::Purchase
}

/// Two title words of `doc`. Generic words are usually skipped and a letter
/// is occasionally dropped.
fn noisy_query(rng: &mut ChaCha8Rng, doc: &WebDocument) -> String {
    let words = tokenize(&doc.title);
    let keep_generic = rng.gen_bool(0.15);
    let mut pool: Vec<&String> = words
        .iter()
        .filter(|w| keep_generic || !GENERIC_WORDS.contains(&w.as_str()))
        .collect();
    if pool.is_empty() {
        pool = words.iter().collect();
    }
    let take = pool.len().min(2);
    let mut picked: Vec<String> = pool
        .choose_multiple(rng, take)
        .map(|w| (*w).clone())
        .collect();
    if rng.gen_bool(0.1) {
        if let Some(w) = picked.iter_mut().find(|w| w.len() > 3) {
            let at = rng.gen_range(1..w.len());
            w.remove(at);
        }
    }
    picked.join(" ")
}

/// One synthetic user per 200 events, and at least one.
pub fn default_users(n_events: usize) -> usize {
    (n_events / 200).max(1)
}

/// Generates exactly `n_events` log records over `n_users` synthetic users.
///
/// Records are returned sorted by timestamp. At least 70% of every user's
/// purchases land in their planted subcategory.
pub fn generate_transactions(
    catalog: &[WebDocument],
    seed: u64,
    n_events: usize,
    n_users: usize,
) -> Result<SyntheticLog> {
    if n_events == 0 {
        return Ok(SyntheticLog {
            records: Vec::new(),
            ground_truth: GroundTruth::new(),
        });
    }
    if catalog.is_empty() {
        return Err(Error::InvalidInput(
            "cannot generate events over an empty catalog".into(),
        ));
    }
    if n_users == 0 {
        return Err(Error::InvalidInput(
            "cannot generate events without users".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1065);

    let mut sub_names: Vec<&str> = Vec::new();
    let mut sub_index: HashMap<&str, usize> = HashMap::new();
    let mut by_sub: Vec<Vec<usize>> = Vec::new();
    for (i, doc) in catalog.iter().enumerate() {
        let slot = *sub_index
            .entry(doc.subcategory.as_str())
            .or_insert_with(|| {
                sub_names.push(doc.subcategory.as_str());
                by_sub.push(Vec::new());
                by_sub.len() - 1
            });
        by_sub[slot].push(i);
    }

    let mut users: Vec<SynthUser> = (0..n_users)
        .map(|u| {
            let favourite = rng.gen_range(0..by_sub.len());
            let take = by_sub[favourite].len().min(WISHLIST_SIZE);
            let wishlist = by_sub[favourite]
                .choose_multiple(&mut rng, take)
                .copied()
                .collect();
            SynthUser {
                id: format!("u{:04}", u + 1),
                favourite,
                wishlist,
                clock: BASE_TIMESTAMP + rng.gen_range(0..86_400),
                purchases: 0,
                off_favourite_purchases: 0,
            }
        })
        .collect();

    let mut records: Vec<LogRecord> = Vec::with_capacity(n_events);
    let mut session_no = 0usize;
    while records.len() < n_events {
        session_no += 1;
        let session_id = format!("s{session_no:06}");
        let user = &mut users[rng.gen_range(0..n_users)];
        let favourite = user.favourite;

        let intent = if by_sub.len() > 1 && rng.gen_bool(0.1) {
            loop {
                let s = rng.gen_range(0..by_sub.len());
                if s != favourite {
                    break s;
                }
            }
        } else {
            favourite
        };

        let first = if intent == favourite && rng.gen_bool(0.7) {
            *user.wishlist.choose(&mut rng).unwrap()
        } else {
            *by_sub[intent].choose(&mut rng).unwrap()
        };
        let query = noisy_query(&mut rng, &catalog[first]);

        let len = rng.gen_range(3..=8).min(n_events - records.len());
        let mut ts = user.clock;
        for step in 0..len {
            let doc = if step == 0 {
                first
            } else {
                let x: f64 = rng.gen();
                if intent == favourite && x < 0.55 {
                    *user.wishlist.choose(&mut rng).unwrap()
                } else if x < 0.85 {
                    *by_sub[intent].choose(&mut rng).unwrap()
                } else {
                    rng.gen_range(0..catalog.len())
                }
            };
            let doc_sub = sub_index[catalog[doc].subcategory.as_str()];
            let in_favourite = doc_sub == favourite;
            let mut event = if user.wishlist.contains(&doc) {
                pick_event(&mut rng, [0.35, 0.30, 0.15, 0.20])
            } else if in_favourite {
                pick_event(&mut rng, [0.55, 0.30, 0.10, 0.05])
            } else if doc_sub == intent {
                pick_event(&mut rng, [0.60, 0.30, 0.07, 0.03])
            } else {
                pick_event(&mut rng, [0.85, 0.15, 0.0, 0.0])
            };
            if event == EventType::Purchase {
                if !in_favourite
                    && 10 * (user.off_favourite_purchases + 1) > 3 * (user.purchases + 1)
                {
                    event = EventType::AddToCart;
                } else {
                    user.purchases += 1;
                    user.off_favourite_purchases += usize::from(!in_favourite);
                }
            }
            let dwell = if in_favourite {
                rng.gen_range(60.0..240.0)
            } else {
                rng.gen_range(5.0..60.0)
            };
            let dwell = (dwell * 10.0_f64).round() / 10.0;
            records.push(LogRecord {
                timestamp: ts,
                user_id: user.id.clone(),
                session_id: session_id.clone(),
                query: query.clone(),
                doc_id: catalog[doc].doc_id.clone(),
                dwell_seconds: dwell,
                event_type: event,
            });
            ts += dwell.ceil() as i64 + rng.gen_range(1..30);
        }
        user.clock = ts + rng.gen_range(3_600..3 * 86_400);
    }

    records.sort_by_key(|r| r.timestamp);
    let ground_truth = users
        .iter()
        .map(|u| (u.id.clone(), sub_names[u.favourite].to_string()))
        .collect();
    Ok(SyntheticLog {
        records,
        ground_truth,
    })
}

pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, truth).map_err(|e| Error::io(path, e.into()))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn default_scale_catalog_covers_taxonomy() {
        let cat = generate_catalog(1, 5800, &Taxonomy::books());
        assert_eq!(cat.len(), 5800);
        let subs: BTreeSet<_> = cat.iter().map(|d| d.subcategory.as_str()).collect();
        assert_eq!(subs.len(), 30);
        crate::corpus::validate_catalog(&cat, &Taxonomy::books()).unwrap();
    }

    #[test]
    fn empty_catalog() {
        assert!(generate_catalog(1, 0, &Taxonomy::books()).is_empty());
    }

    #[test]
    fn catalog_is_deterministic() {
        let a = serde_json::to_string(&generate_catalog(9, 200, &Taxonomy::books())).unwrap();
        let b = serde_json::to_string(&generate_catalog(9, 200, &Taxonomy::books())).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_catalog(10, 200, &Taxonomy::books())).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_scale_transactions() {
        let cat = generate_catalog(1, 5800, &Taxonomy::books());
        let log = generate_transactions(&cat, 1, 6400, 64).unwrap();
        assert_eq!(log.records.len(), 6400);
        let ids: HashSet<_> = cat.iter().map(|d| d.doc_id.as_str()).collect();
        assert!(log.records.iter().all(|r| ids.contains(r.doc_id.as_str())));
        assert!(log.records.iter().all(|r| r.dwell_seconds >= 0.0));
        assert!(log
            .records
            .windows(2)
            .all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn zero_events_and_empty_catalog() {
        let log = generate_transactions(&[], 1, 0, 5).unwrap();
        assert!(log.records.is_empty());
        assert!(matches!(
            generate_transactions(&[], 1, 10, 5),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn planted_preference_dominates_purchases() {
        // Recount from the emitted records alone.
        for seed in 1..=5 {
            let cat = generate_catalog(seed, 1000, &Taxonomy::books());
            let log = generate_transactions(&cat, seed, 2000, 20).unwrap();
            let sub_of: HashMap<&str, &str> = cat
                .iter()
                .map(|d| (d.doc_id.as_str(), d.subcategory.as_str()))
                .collect();
            let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
            for r in &log.records {
                if r.event_type == EventType::Purchase {
                    let t = tally.entry(r.user_id.as_str()).or_default();
                    t.1 += 1;
                    if sub_of[r.doc_id.as_str()] == log.ground_truth[&r.user_id] {
                        t.0 += 1;
                    }
                }
            }
            assert!(!tally.is_empty());
            for (user, (hit, total)) in tally {
                assert!(
                    hit as f64 >= 0.7 * total as f64,
                    "seed {seed} user {user}: {hit}/{total}"
                );
            }
        }
    }
}
