//! The five network inputs for a (query, candidate page) pair.
//!
//! | input | meaning                                   |
//! |-------|-------------------------------------------|
//! | I1    | content: fraction of query words present  |
//! | I2    | time: normalised average dwell            |
//! | I3    | feedback: strongest past event on the page|
//! | I4    | semantic: history match × taxonomy affinity |
//! | I5    | deviation: mean normalised edit distance  |

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bpnn::TrainingExample;
use crate::content::content_score;
use crate::corpus::{EventType, Session, Taxonomy};
use crate::dwell::{time_scores, TimeDb};
use crate::error::{Error, Result};
use crate::index::CatalogIndex;
use crate::semantics::{match_session, semantic_score, SessionMatch, UserHistoryDb};
use crate::textprep::{parse_query, Query, WebDictionary};

pub const N_FEATURES: usize = 5;

/// Negative samples drawn per engaged page when building training data.
pub const NEGATIVES_PER_POSITIVE: usize = 3;

/// Network input, components in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector([f64; N_FEATURES]);

impl FeatureVector {
    pub fn content(&self) -> f64 {
        self.0[0]
    }

    pub fn time(&self) -> f64 {
        self.0[1]
    }

    pub fn feedback(&self) -> f64 {
        self.0[2]
    }

    pub fn semantic(&self) -> f64 {
        self.0[3]
    }

    pub fn deviation(&self) -> f64 {
        self.0[4]
    }

    pub fn as_array(&self) -> &[f64; N_FEATURES] {
        &self.0
    }
}

/// Clamps each component into [0, 1]. Non-finite inputs are rejected.
pub fn assemble(
    content: f64,
    time: f64,
    feedback: f64,
    semantic: f64,
    deviation: f64,
) -> Result<FeatureVector> {
    let raw = [content, time, feedback, semantic, deviation];
    if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::contract(format!(
            "feature value {bad} is not finite"
        )));
    }
    Ok(FeatureVector(raw.map(|v| v.clamp(0.0, 1.0))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    target: [f64; 1],
}

impl LabeledExample {
    pub fn new(features: FeatureVector, target: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::contract(format!("target {target} outside [0, 1]")));
        }
        Ok(LabeledExample {
            features,
            target: [target],
        })
    }

    pub fn target_value(&self) -> f64 {
        self.target[0]
    }
}

impl TrainingExample for LabeledExample {
    fn input(&self) -> &[f64] {
        self.features.as_array()
    }

    fn target(&self) -> &[f64] {
        &self.target
    }
}

/// Strongest engagement among the events; 0 when there are none.
pub fn feedback_score<I: IntoIterator<Item = EventType>>(events: I) -> f64 {
    events
        .into_iter()
        .map(EventType::weight)
        .fold(0.0, f64::max)
}

/// Unit-cost edit distance between two strings, by bytes.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Distance from `word` to its nearest stem, scaled by the longer of the
/// two lengths. 1.0 when there are no stems.
fn nearest_stem_deviation<'a, I>(word: &str, stems: I) -> f64
where
    I: IntoIterator<Item = &'a str>,
{
    let mut best = 1.0f64;
    for s in stems {
        if s == word {
            return 0.0;
        }
        let longest = word.len().max(s.len()).max(1);
        best = best.min(levenshtein(word, s) as f64 / longest as f64);
    }
    best
}

pub fn word_deviation(word: &str, dict: &WebDictionary) -> f64 {
    nearest_stem_deviation(word, dict.stems.iter().map(String::as_str))
}

/// Mean per-word deviation of the query from a page. An empty dictionary
/// deviates fully.
pub fn deviation_score(query: &Query, dict: &WebDictionary) -> f64 {
    deviation_over(query, dict.stems.iter().map(String::as_str))
}

/// [`deviation_score`] over any stem collection.
pub(crate) fn deviation_over<'a, I>(query: &Query, stems: I) -> f64
where
    I: IntoIterator<Item = &'a str> + Clone,
{
    if query.is_empty() {
        return 1.0;
    }
    query
        .words
        .iter()
        .map(|w| nearest_stem_deviation(w, stems.clone()))
        .sum::<f64>()
        / query.len() as f64
}

/// Strongest event seen so far for each (user, page).
#[derive(Debug, Clone, Default)]
pub struct FeedbackIndex {
    best: HashMap<String, HashMap<String, f64>>,
}

impl FeedbackIndex {
    pub fn new() -> Self {
        FeedbackIndex::default()
    }

    pub fn record(&mut self, user_id: &str, doc_id: &str, event: EventType) {
        let slot = self
            .best
            .entry(user_id.to_string())
            .or_default()
            .entry(doc_id.to_string())
            .or_insert(0.0);
        *slot = slot.max(event.weight());
    }

    pub fn score(&self, user_id: &str, doc_id: &str) -> f64 {
        self.best
            .get(user_id)
            .and_then(|docs| docs.get(doc_id))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Read-only stores the scoring modules draw on.
#[derive(Clone, Copy)]
pub struct ScoringContext<'a> {
    pub index: &'a CatalogIndex,
    pub taxonomy: &'a Taxonomy,
    pub time_db: &'a TimeDb,
    pub history: &'a UserHistoryDb,
    pub feedback: &'a FeedbackIndex,
}

impl ScoringContext<'_> {
    /// Feature vectors of `docs` for `user_id` issuing `query`. The time
    /// feature is normalised over `docs`.
    pub fn features(
        &self,
        query: &Query,
        user_id: &str,
        docs: &[usize],
    ) -> Result<Vec<FeatureVector>> {
        if docs.is_empty() {
            return Ok(Vec::new());
        }
        let m: SessionMatch = match_session(query, user_id, self.history);
        let ids: Vec<&str> = docs
            .iter()
            .map(|&i| self.index.doc(i).doc_id.as_str())
            .collect();
        let times = time_scores(&ids, self.time_db)?;
        let stats = self.index.content_stats(query, docs);
        docs.iter()
            .zip(stats)
            .zip(times)
            .map(|((&i, st), time)| {
                let doc = self.index.doc(i);
                assemble(
                    content_score(&st)?,
                    time,
                    self.feedback.score(user_id, &doc.doc_id),
                    semantic_score(doc, &m, self.taxonomy),
                    deviation_over(query, self.index.capped_stems(i, query.max_len)),
                )
            })
            .collect()
    }
}

/// Builds labelled examples by replaying sessions in time order.
///
/// Each session with a query yields one example per visited page, labelled
/// with the strongest event of the session on it, plus
/// [`NEGATIVES_PER_POSITIVE`] unvisited pages per visited one labelled 0.
/// Negatives come from the query's retrieved candidates first, then from
/// the whole catalog. Feedback and history features only see sessions that
/// started earlier; `history` seeds the replayed history store.
pub fn build_training_set(
    index: &CatalogIndex,
    taxonomy: &Taxonomy,
    sessions: &[Session],
    time_db: &TimeDb,
    history: &UserHistoryDb,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&Session> = sessions.iter().collect();
    order.sort_by_key(|s| s.start());

    let subcategory_of: HashMap<&str, &str> = index
        .docs()
        .iter()
        .map(|d| (d.doc_id.as_str(), d.subcategory.as_str()))
        .collect();
    let mut history = history.clone();
    let mut feedback = FeedbackIndex::new();
    let mut examples = Vec::new();

    for session in order {
        if let Some(query) = session.query().and_then(|q| parse_query(q).ok()) {
            let mut targets: Vec<(usize, f64)> = Vec::new();
            for r in &session.records {
                let Some(i) = index.position(&r.doc_id) else {
                    continue;
                };
                match targets.iter_mut().find(|(d, _)| *d == i) {
                    Some((_, t)) => *t = t.max(r.event_type.weight()),
                    None => targets.push((i, r.event_type.weight())),
                }
            }
            if !targets.is_empty() {
                let engaged: HashSet<usize> = targets.iter().map(|(d, _)| *d).collect();
                let want = NEGATIVES_PER_POSITIVE * targets.len();
                let mut pool: Vec<usize> = index
                    .candidates(&query)
                    .into_iter()
                    .filter(|d| !engaged.contains(d))
                    .collect();
                pool.shuffle(&mut rng);
                pool.truncate(want);
                let mut chosen: HashSet<usize> = pool.iter().copied().collect();
                let mut attempts = 0;
                while pool.len() < want && attempts < 20 * want {
                    attempts += 1;
                    let d = rng.gen_range(0..index.len());
                    if !engaged.contains(&d) && chosen.insert(d) {
                        pool.push(d);
                    }
                }
                targets.extend(pool.into_iter().map(|d| (d, 0.0)));

                let docs: Vec<usize> = targets.iter().map(|(d, _)| *d).collect();
                let ctx = ScoringContext {
                    index,
                    taxonomy,
                    time_db,
                    history: &history,
                    feedback: &feedback,
                };
                let feats = ctx.features(&query, &session.user_id, &docs)?;
                for (f, (_, t)) in feats.into_iter().zip(&targets) {
                    examples.push(LabeledExample::new(f, *t)?);
                }
            }
        }
        for r in &session.records {
            feedback.record(&session.user_id, &r.doc_id, r.event_type);
        }
        history.record_session(session, &subcategory_of);
    }
    Ok(examples)
}

#[derive(Serialize)]
struct DumpLine<'a> {
    f: &'a [f64; N_FEATURES],
    y: f64,
}

/// Writes examples as `{"f": [..5], "y": t}` lines.
pub fn write_training_set<W: Write>(
    examples: &[LabeledExample],
    mut out: W,
) -> std::io::Result<()> {
    for ex in examples {
        let line = DumpLine {
            f: ex.features.as_array(),
            y: ex.target_value(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::parse_query;
    use proptest::prelude::*;

    fn dict(words: &[&str]) -> WebDictionary {
        WebDictionary {
            doc_id: "d".into(),
            stems: words.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Full-matrix edit distance over chars.
    fn edit_distance_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1)
                    .min(d[i][j - 1] + 1)
                    .min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn feedback_examples() {
        assert_eq!(feedback_score([EventType::View, EventType::Purchase]), 1.0);
        assert_eq!(feedback_score([]), 0.0);
        assert_eq!(feedback_score([EventType::Click]), 0.5);
    }

    #[test]
    fn deviation_examples() {
        let q = parse_query("book data").unwrap();
        assert_eq!(deviation_score(&q, &dict(&["book", "data", "x"])), 0.0);
        assert_eq!(edit_distance_oracle("bok", "book"), 1);
        assert_eq!(word_deviation("bok", &dict(&["book", "zzzzzz"])), 0.25);
        assert_eq!(deviation_score(&q, &dict(&[])), 1.0);
    }

    #[test]
    fn assemble_examples() {
        let f = assemble(0.75, 0.5, 1.0, 0.4, 0.25).unwrap();
        assert_eq!(f.as_array(), &[0.75, 0.5, 1.0, 0.4, 0.25]);
        assert_eq!(assemble(1.2, 0.0, 0.0, 0.0, 0.0).unwrap().content(), 1.0);
        assert_eq!(
            assemble(0.0, 0.0, 0.0, 0.0, 0.0).unwrap().as_array(),
            &[0.0; 5]
        );
        assert!(assemble(f64::NAN, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(assemble(0.0, f64::INFINITY, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn feedback_index_keeps_maximum() {
        let mut fb = FeedbackIndex::new();
        fb.record("u", "d", EventType::AddToCart);
        fb.record("u", "d", EventType::View);
        assert_eq!(fb.score("u", "d"), 0.75);
        assert_eq!(fb.score("u", "e"), 0.0);
    }

    proptest! {
        #[test]
        fn assembled_components_in_unit_interval(v in prop::array::uniform5(prop_oneof![
            -10.0f64..10.0, Just(0.0), Just(1.0), Just(-0.0), Just(1.0 + f64::EPSILON)
        ])) {
            let f = assemble(v[0], v[1], v[2], v[3], v[4]).unwrap();
            prop_assert!(f.as_array().iter().all(|c| (0.0..=1.0).contains(c)));
        }

        #[test]
        fn levenshtein_matches_oracle(a in "[a-d]{0,8}", b in "[a-d]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &b), edit_distance_oracle(&a, &b));
        }

        #[test]
        fn zero_deviation_iff_all_members(
            q in prop::collection::vec("[a-c]{1,3}", 1..4),
            d in prop::collection::vec("[a-c]{1,3}", 1..6),
        ) {
            let query = parse_query(&q.join(" ")).unwrap();
            let dict = WebDictionary { doc_id: "x".into(), stems: d.iter().cloned().collect() };
            let all_in = query.words.iter().all(|w| dict.contains(w));
            let dev = deviation_score(&query, &dict);
            prop_assert_eq!(dev == 0.0, all_in);
            prop_assert!((0.0..=1.0).contains(&dev));
        }

        #[test]
        fn feedback_monotone(events in prop::collection::vec(0usize..4, 0..6), extra in 0usize..4) {
            let evs: Vec<EventType> = events.iter().map(|&i| EventType::ALL[i]).collect();
            let before = feedback_score(evs.clone());
            let mut more = evs;
            more.push(EventType::ALL[extra]);
            prop_assert!(feedback_score(more) >= before);
        }
    }
}
