//! Priority scoring of candidate pages and descending sort.

use std::cmp::Ordering;

use crate::bpnn::BpNetwork;
use crate::content::filter_candidates;
use crate::error::Result;
use crate::features::{FeatureVector, ScoringContext};
use crate::textprep::Query;

/// Maps a candidate's features to a priority.
pub trait Scorer {
    fn score(&self, user_id: &str, doc_id: &str, features: &FeatureVector) -> Result<f64>;
}

impl Scorer for BpNetwork {
    fn score(&self, _user_id: &str, _doc_id: &str, features: &FeatureVector) -> Result<f64> {
        Ok(self.predict(features.as_array())?[0])
    }
}

/// Ignores the features and draws a reproducible pseudo-random priority
/// per (user, page). Baseline for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, user_id: &str, doc_id: &str, _features: &FeatureVector) -> Result<f64> {
        // FNV-1a over the key, then a splitmix64 finaliser.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for b in user_id.bytes().chain([0xff]).chain(doc_id.bytes()) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
        Ok((h >> 11) as f64 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: Query,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn top(&self, n: usize) -> impl Iterator<Item = &RankedEntry> {
        self.entries.iter().take(n)
    }
}

/// Descending score, ties by ascending doc id.
pub fn sort_entries(entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| match b.score.total_cmp(&a.score) {
        Ordering::Equal => a.doc_id.cmp(&b.doc_id),
        o => o,
    });
}

/// Filters `candidates` (catalog positions) by keyword majority and orders
/// the survivors by `scorer`.
pub fn rank_candidates<S: Scorer + ?Sized>(
    query: &Query,
    user_id: &str,
    candidates: &[usize],
    ctx: &ScoringContext<'_>,
    scorer: &S,
) -> Result<RankedList> {
    let kept: Vec<usize> = filter_candidates(ctx.index.content_stats(query, candidates))
        .iter()
        .filter_map(|s| ctx.index.position(&s.doc_id))
        .collect();
    let features = ctx.features(query, user_id, &kept)?;
    let mut entries = kept
        .iter()
        .zip(&features)
        .map(|(&i, f)| {
            let doc_id = &ctx.index.doc(i).doc_id;
            Ok(RankedEntry {
                doc_id: doc_id.clone(),
                score: scorer.score(user_id, doc_id, f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_entries(&mut entries);
    Ok(RankedList {
        query: query.clone(),
        entries,
    })
}

/// Retrieves candidates for `query` from the catalog index and ranks them.
pub fn rank<S: Scorer + ?Sized>(
    query: &Query,
    user_id: &str,
    ctx: &ScoringContext<'_>,
    scorer: &S,
) -> Result<RankedList> {
    let retrieved = ctx.index.retrieve(query);
    rank_candidates(query, user_id, &retrieved, ctx, scorer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(id: &str, score: f64) -> RankedEntry {
        RankedEntry {
            doc_id: id.into(),
            score,
        }
    }

    #[test]
    fn descending_with_id_ties() {
        let mut v = vec![e("b", 0.4), e("a", 0.9)];
        sort_entries(&mut v);
        assert_eq!(v, vec![e("a", 0.9), e("b", 0.4)]);

        let mut v = vec![e("z", 0.5), e("c", 0.5), e("m", 0.7)];
        sort_entries(&mut v);
        let ids: Vec<_> = v.iter().map(|x| x.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["m", "c", "z"]);
    }

    #[test]
    fn random_scorer_is_reproducible_and_spread() {
        let s = RandomScorer { seed: 4 };
        let f = crate::features::assemble(0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let a = s.score("u", "d1", &f).unwrap();
        assert_eq!(a, s.score("u", "d1", &f).unwrap());
        assert_ne!(a, s.score("u", "d2", &f).unwrap());
        assert_ne!(a, RandomScorer { seed: 5 }.score("u", "d1", &f).unwrap());
        assert!((0.0..1.0).contains(&a));
    }
}
