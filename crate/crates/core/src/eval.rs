//! Offline evaluation: micro-averaged precision and recall, seeded k-fold
//! splits, and the access-sequence-length sweep.
//!
//! For a test user `u`, `R(u)` is the top-n of the ranking produced for
//! their first test-fold query and `T(u)` the pages they purchased in the
//! test fold. The user's observed history (feedback and query history) is
//! their training-fold access records, optionally cut to the first `L`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bpnn::{Activation, BpNetwork, LayerSizes, TrainConfig};
use crate::corpus::{sessionize, EventType, LogRecord, Session, Taxonomy};
use crate::dwell::TimeDb;
use crate::error::{Error, Result};
use crate::features::{build_training_set, FeedbackIndex, ScoringContext};
use crate::index::CatalogIndex;
use crate::rank::{rank, Scorer};
use crate::semantics::UserHistoryDb;
use crate::textprep::parse_query;

/// user_id → set of doc ids.
pub type UserItems = BTreeMap<String, BTreeSet<String>>;

fn hits(recommended: &UserItems, truth: &UserItems) -> usize {
    recommended
        .iter()
        .filter_map(|(u, r)| truth.get(u).map(|t| r.intersection(t).count()))
        .sum()
}

/// `Σ_u |R(u) ∩ T(u)| / Σ_u |R(u)|`.
pub fn precision(recommended: &UserItems, truth: &UserItems) -> Result<f64> {
    let denom: usize = recommended.values().map(BTreeSet::len).sum();
    if denom == 0 {
        return Err(Error::UndefinedMetric("precision"));
    }
    Ok(hits(recommended, truth) as f64 / denom as f64)
}

/// `Σ_u |R(u) ∩ T(u)| / Σ_u |T(u)|`.
pub fn recall(recommended: &UserItems, truth: &UserItems) -> Result<f64> {
    let denom: usize = truth.values().map(BTreeSet::len).sum();
    if denom == 0 {
        return Err(Error::UndefinedMetric("recall"));
    }
    Ok(hits(recommended, truth) as f64 / denom as f64)
}

/// Seeded shuffle, then `k` contiguous parts whose sizes differ by at most
/// one. Fold `i` tests on part `i` and trains on the rest.
pub fn kfold_split<T: Clone>(items: &[T], k: usize, seed: u64) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k-fold needs k >= 2, got {k}")));
    }
    if items.len() < k {
        return Err(Error::InvalidInput(format!(
            "{} items cannot fill {k} folds",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = items.len() / k;
    let extra = items.len() % k;
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for i in 0..k {
        bounds.push(bounds[i] + base + usize::from(i < extra));
    }
    Ok((0..k)
        .map(|i| {
            let (lo, hi) = (bounds[i], bounds[i + 1]);
            let test = order[lo..hi].iter().map(|&j| items[j].clone()).collect();
            let train = order[..lo]
                .iter()
                .chain(&order[hi..])
                .map(|&j| items[j].clone())
                .collect();
            (train, test)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserOutcome {
    pub user_id: String,
    /// |R(u)|
    pub recommended: usize,
    /// |T(u)|
    pub relevant: usize,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub fold: usize,
    /// `None` when the full observed history was used.
    pub seq_len: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub n_users: usize,
    pub top_n: usize,
    #[serde(skip)]
    pub users: Vec<UserOutcome>,
}

/// A network fitted on one training split, with the dwell store it saw.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub net: BpNetwork,
    pub time_db: TimeDb,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub sizes: LayerSizes,
    pub output_activation: Activation,
    pub train: TrainConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            sizes: LayerSizes::default(),
            output_activation: Activation::Logistic,
            train: TrainConfig::default(),
        }
    }
}

fn records_in_time_order(sessions: &[Session]) -> Vec<&LogRecord> {
    let mut recs: Vec<&LogRecord> = sessions.iter().flat_map(|s| &s.records).collect();
    recs.sort_by_key(|r| r.timestamp);
    recs
}

/// Builds the dwell store and training set from `sessions` and fits a
/// fresh network.
pub fn fit(
    index: &CatalogIndex,
    taxonomy: &Taxonomy,
    sessions: &[Session],
    cfg: &ModelConfig,
) -> Result<FittedModel> {
    let time_db = TimeDb::from_records(records_in_time_order(sessions));
    let examples = build_training_set(
        index,
        taxonomy,
        sessions,
        &time_db,
        &UserHistoryDb::new(),
        cfg.train.seed,
    )?;
    if examples.is_empty() {
        return Err(Error::InvalidInput(
            "no training examples: sessions have no usable query".into(),
        ));
    }
    let mut net =
        BpNetwork::init(cfg.train.seed, cfg.sizes)?.with_output_activation(cfg.output_activation);
    let loss_history = net.train(&examples, &cfg.train)?;
    Ok(FittedModel {
        net,
        time_db,
        loss_history,
    })
}

fn by_user(sessions: &[Session]) -> BTreeMap<&str, Vec<&Session>> {
    let mut map: BTreeMap<&str, Vec<&Session>> = BTreeMap::new();
    for s in sessions {
        map.entry(s.user_id.as_str()).or_default().push(s);
    }
    for list in map.values_mut() {
        list.sort_by_key(|s| s.start());
    }
    map
}

/// Scores one test split with a fixed model.
///
/// `seq_len` cuts each user's observed history to its first `L` accesses.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_split<S: Scorer + Sync + ?Sized>(
    index: &CatalogIndex,
    taxonomy: &Taxonomy,
    train: &[Session],
    test: &[Session],
    time_db: &TimeDb,
    scorer: &S,
    seq_len: Option<usize>,
    top_n: usize,
) -> Result<EvalReport> {
    let subcategory_of: HashMap<&str, &str> = index
        .docs()
        .iter()
        .map(|d| (d.doc_id.as_str(), d.subcategory.as_str()))
        .collect();
    let train_by_user = by_user(train);

    let mut recommended = UserItems::new();
    let mut truth = UserItems::new();
    let mut users = Vec::new();
    for (user, sessions) in by_user(test) {
        let relevant: BTreeSet<String> = sessions
            .iter()
            .flat_map(|s| &s.records)
            .filter(|r| r.event_type == EventType::Purchase)
            .map(|r| r.doc_id.clone())
            .collect();
        let query = sessions
            .iter()
            .find_map(|s| s.query().and_then(|q| parse_query(q).ok()));
        let (Some(query), false) = (query, relevant.is_empty()) else {
            continue;
        };

        let history_sessions: &[&Session] = train_by_user.get(user).map_or(&[], Vec::as_slice);
        let mut observed: Vec<LogRecord> = history_sessions
            .iter()
            .flat_map(|s| s.records.iter().cloned())
            .collect();
        if let Some(l) = seq_len {
            observed.truncate(l);
        }
        let mut feedback = FeedbackIndex::new();
        for r in &observed {
            feedback.record(&r.user_id, &r.doc_id, r.event_type);
        }
        let mut history = UserHistoryDb::new();
        for s in sessionize(observed) {
            history.record_session(&s, &subcategory_of);
        }

        let ctx = ScoringContext {
            index,
            taxonomy,
            time_db,
            history: &history,
            feedback: &feedback,
        };
        let ranked = rank(&query, user, &ctx, scorer)?;
        let top: BTreeSet<String> = ranked.top(top_n).map(|e| e.doc_id.clone()).collect();
        users.push(UserOutcome {
            user_id: user.to_string(),
            recommended: top.len(),
            relevant: relevant.len(),
            hits: top.intersection(&relevant).count(),
        });
        recommended.insert(user.to_string(), top);
        truth.insert(user.to_string(), relevant);
    }

    if users.is_empty() {
        return Err(Error::InvalidInput(
            "no test user has both a query and a purchase".into(),
        ));
    }
    Ok(EvalReport {
        fold: 0,
        seq_len,
        precision: precision(&recommended, &truth).unwrap_or(0.0),
        recall: recall(&recommended, &truth)?,
        n_users: users.len(),
        top_n,
        users,
    })
}

/// One report per access-sequence length, in the order given.
#[allow(clippy::too_many_arguments)]
pub fn sweep_sequence_length<S: Scorer + Sync + ?Sized>(
    index: &CatalogIndex,
    taxonomy: &Taxonomy,
    train: &[Session],
    test: &[Session],
    time_db: &TimeDb,
    scorer: &S,
    lengths: &[usize],
    top_n: usize,
) -> Result<Vec<EvalReport>> {
    lengths
        .iter()
        .map(|&l| {
            evaluate_split(
                index,
                taxonomy,
                train,
                test,
                time_db,
                scorer,
                Some(l),
                top_n,
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub folds: usize,
    pub lengths: Vec<usize>,
    pub top_n: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            lengths: vec![2, 4, 6, 8],
            top_n: 10,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

/// k-fold cross-validation over sessions. Each fold contributes one report
/// on the full observed history followed by one per sweep length. Folds run
/// in parallel; output order is by fold.
pub fn cross_validate(
    index: &CatalogIndex,
    taxonomy: &Taxonomy,
    records: Vec<LogRecord>,
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    let sessions = sessionize(records);
    let folds = kfold_split(&sessions, cfg.folds, cfg.seed)?;
    let per_fold: Vec<Result<Vec<EvalReport>>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, (train, test))| {
            let model = fit(index, taxonomy, train, &cfg.model)?;
            let mut out = vec![evaluate_split(
                index,
                taxonomy,
                train,
                test,
                &model.time_db,
                &model.net,
                None,
                cfg.top_n,
            )?];
            out.extend(sweep_sequence_length(
                index,
                taxonomy,
                train,
                test,
                &model.time_db,
                &model.net,
                &cfg.lengths,
                cfg.top_n,
            )?);
            for r in &mut out {
                r.fold = f;
            }
            Ok(out)
        })
        .collect();
    let mut reports = Vec::new();
    for fold in per_fold {
        reports.extend(fold?);
    }
    Ok(reports)
}

pub fn reports_to_json(reports: &[EvalReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialise") + "\n"
}

/// Aligned plain-text table of the reports.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4}  {:>7}  {:>9}  {:>9}  {:>7}  {:>5}",
        "fold", "seq_len", "precision", "recall", "n_users", "top_n"
    );
    for r in reports {
        let len = r
            .seq_len
            .map_or_else(|| "all".to_string(), |l| l.to_string());
        let _ = writeln!(
            out,
            "{:>4}  {:>7}  {:>9.4}  {:>9.4}  {:>7}  {:>5}",
            r.fold, len, r.precision, r.recall, r.n_users, r.top_n
        );
    }
    out
}
