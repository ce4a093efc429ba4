//! In-memory keyword index over a catalog, used for candidate retrieval.

use std::collections::{BTreeSet, HashMap};

use crate::content::{filter_candidates, ContentStats};
use crate::corpus::WebDocument;
use crate::textprep::{cap_dictionary, document_stems, Query, WebDictionary};

pub struct CatalogIndex {
    docs: Vec<WebDocument>,
    stems: Vec<BTreeSet<String>>,
    postings: HashMap<String, Vec<usize>>,
    by_id: HashMap<String, usize>,
}

impl CatalogIndex {
    pub fn new(docs: Vec<WebDocument>) -> Self {
        let stems: Vec<BTreeSet<String>> = docs.iter().map(document_stems).collect();
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, set) in stems.iter().enumerate() {
            for s in set {
                postings.entry(s.clone()).or_default().push(i);
            }
        }
        let by_id = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();
        CatalogIndex {
            docs,
            stems,
            postings,
            by_id,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[WebDocument] {
        &self.docs
    }

    pub fn doc(&self, i: usize) -> &WebDocument {
        &self.docs[i]
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).copied()
    }

    pub fn stems(&self, i: usize) -> &BTreeSet<String> {
        &self.stems[i]
    }

    /// Web dictionary of document `i` for a query.
    pub fn dictionary(&self, i: usize, query: &Query) -> WebDictionary {
        cap_dictionary(&self.docs[i].doc_id, &self.stems[i], query.max_len)
    }

    /// Stems of document `i` no longer than `max_len`, without copying.
    pub fn capped_stems(&self, i: usize, max_len: usize) -> impl Iterator<Item = &str> + Clone {
        self.stems[i]
            .iter()
            .map(String::as_str)
            .filter(move |s| s.len() <= max_len)
    }

    /// Documents sharing at least one stem with the query, in catalog order.
    pub fn retrieve(&self, query: &Query) -> Vec<usize> {
        let mut hits: BTreeSet<usize> = BTreeSet::new();
        for w in &query.words {
            if let Some(list) = self.postings.get(w) {
                hits.extend(list);
            }
        }
        hits.into_iter().collect()
    }

    /// Found/nfound counts for the given documents.
    ///
    /// Same result as [`count_matches`](crate::content::count_matches) on [`CatalogIndex::dictionary`]:
    /// every query word is within the query's own length cap.
    pub fn content_stats(&self, query: &Query, docs: &[usize]) -> Vec<ContentStats> {
        docs.iter()
            .map(|&i| {
                let found = query
                    .words
                    .iter()
                    .filter(|w| self.stems[i].contains(*w))
                    .count();
                ContentStats {
                    doc_id: self.docs[i].doc_id.clone(),
                    found,
                    nfound: query.len() - found,
                }
            })
            .collect()
    }

    /// Retrieved documents that survive the majority filter.
    pub fn candidates(&self, query: &Query) -> Vec<usize> {
        let stats = self.content_stats(query, &self.retrieve(query));
        filter_candidates(stats)
            .iter()
            .map(|s| self.by_id[&s.doc_id])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::count_matches;
    use crate::textprep::parse_query;

    fn doc(id: &str, title: &str) -> WebDocument {
        WebDocument {
            doc_id: id.into(),
            title: title.into(),
            body: "book".into(),
            category: "computing".into(),
            subcategory: "databases".into(),
            url: String::new(),
        }
    }

    #[test]
    fn retrieval_and_filter() {
        let idx = CatalogIndex::new(vec![
            doc("a", "data mining"),
            doc("b", "data"),
            doc("c", "cooking"),
            doc("d", "mining data warehouses"),
        ]);
        let q = parse_query("data mining warehouse").unwrap();
        assert_eq!(idx.retrieve(&q), vec![0, 1, 3]);
        // "b" has 1 of 3 words and is dropped.
        assert_eq!(idx.candidates(&q), vec![0, 3]);
        assert_eq!(idx.position("c"), Some(2));
        for i in 0..idx.len() {
            let direct = count_matches(&q, &idx.dictionary(i, &q));
            assert_eq!(idx.content_stats(&q, &[i])[0], direct);
        }
    }
}
