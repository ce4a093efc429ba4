use std::collections::HashMap;

use super::LogRecord;

/// Records of one `(user, session)` pair in visit order.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub user_id: String,
    pub session_id: String,
    pub records: Vec<LogRecord>,
    /// Visited documents with adjacent repeats collapsed.
    pub access_sequence: Vec<String>,
}

impl Session {
    /// First non-blank query issued in the session.
    pub fn query(&self) -> Option<&str> {
        self.records
            .iter()
            .map(|r| r.query.as_str())
            .find(|q| !q.trim().is_empty())
    }

    pub fn start(&self) -> i64 {
        self.records[0].timestamp
    }
}

/// Groups records by `(user_id, session_id)`.
///
/// Sessions come out in order of first appearance in the input. Within a
/// session, records are sorted by timestamp with ties kept in input order.
pub fn sessionize<I>(records: I) -> Vec<Session>
where
    I: IntoIterator<Item = LogRecord>,
{
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut groups: Vec<Vec<LogRecord>> = Vec::new();
    for rec in records {
        let key = (rec.user_id.clone(), rec.session_id.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(rec);
    }

    groups
        .into_iter()
        .map(|mut records| {
            records.sort_by_key(|r| r.timestamp);
            let mut access_sequence: Vec<String> = Vec::with_capacity(records.len());
            for r in &records {
                if access_sequence.last() != Some(&r.doc_id) {
                    access_sequence.push(r.doc_id.clone());
                }
            }
            Session {
                user_id: records[0].user_id.clone(),
                session_id: records[0].session_id.clone(),
                records,
                access_sequence,
            }
        })
        .collect()
}
