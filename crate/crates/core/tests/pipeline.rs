use std::collections::BTreeSet;

use semrank::bpnn::TrainConfig;
use semrank::corpus::{
    load_catalog, load_log, save_catalog, save_log, sessionize, synth, Taxonomy,
};
use semrank::dwell::TimeDb;
use semrank::eval::{fit, ModelConfig};
use semrank::features::{build_training_set, FeedbackIndex, ScoringContext};
use semrank::index::CatalogIndex;
use semrank::rank::rank;
use semrank::semantics::UserHistoryDb;
use semrank::textprep::{parse_query, tokenize};

#[test]
fn stores_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let taxonomy = Taxonomy::books();
    let catalog = synth::generate_catalog(2, 200, &taxonomy);
    let log = synth::generate_transactions(&catalog, 2, 800, 4).unwrap();

    save_catalog(&catalog, &dir.path().join("c.json")).unwrap();
    save_log(&log.records, &dir.path().join("l.jsonl")).unwrap();
    assert_eq!(load_catalog(&dir.path().join("c.json")).unwrap(), catalog);
    let (records, stats) = load_log(&dir.path().join("l.jsonl")).unwrap();
    assert_eq!(records, log.records);
    assert_eq!(stats.skipped, 0);

    let time_db = TimeDb::from_records(&records);
    time_db.save(&dir.path().join("t.jsonl")).unwrap();
    assert_eq!(TimeDb::load(&dir.path().join("t.jsonl")).unwrap(), time_db);

    let history = UserHistoryDb::from_sessions(&sessionize(records), &catalog);
    history.save(&dir.path().join("h.jsonl")).unwrap();
    assert_eq!(
        UserHistoryDb::load(&dir.path().join("h.jsonl")).unwrap(),
        history
    );
}

#[test]
fn training_lowers_loss_on_synthetic_data() {
    let taxonomy = Taxonomy::books();
    let catalog = synth::generate_catalog(5, 600, &taxonomy);
    let log = synth::generate_transactions(&catalog, 5, 1500, synth::default_users(1500)).unwrap();
    let index = CatalogIndex::new(catalog);
    let sessions = sessionize(log.records);
    let cfg = ModelConfig {
        train: TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        },
        ..ModelConfig::default()
    };
    let model = fit(&index, &taxonomy, &sessions, &cfg).unwrap();
    let first = model.loss_history[0];
    let last = *model.loss_history.last().unwrap();
    assert!(last < first, "loss {first} -> {last}");
}

#[test]
fn training_targets_follow_engagement() {
    let taxonomy = Taxonomy::books();
    let catalog = synth::generate_catalog(8, 300, &taxonomy);
    let log = synth::generate_transactions(&catalog, 8, 600, 3).unwrap();
    let index = CatalogIndex::new(catalog);
    let time_db = TimeDb::from_records(&log.records);
    let sessions = sessionize(log.records);
    let examples = build_training_set(
        &index,
        &taxonomy,
        &sessions,
        &time_db,
        &UserHistoryDb::new(),
        8,
    )
    .unwrap();
    let targets: BTreeSet<u64> = examples
        .iter()
        .map(|e| e.target_value().to_bits())
        .collect();
    for t in targets {
        let t = f64::from_bits(t);
        assert!(
            [0.0, 0.25, 0.5, 0.75, 1.0].contains(&t),
            "unexpected target {t}"
        );
    }
    assert!(examples.iter().any(|e| e.target_value() == 0.0));
    assert!(examples.iter().any(|e| e.target_value() == 1.0));
}

#[test]
fn ranking_only_returns_filtered_candidates() {
    let taxonomy = Taxonomy::books();
    let catalog = synth::generate_catalog(3, 400, &taxonomy);
    let log = synth::generate_transactions(&catalog, 3, 900, 4).unwrap();
    let index = CatalogIndex::new(catalog);
    let sessions = sessionize(log.records.clone());
    let model = fit(&index, &taxonomy, &sessions, &ModelConfig::default()).unwrap();
    let history = UserHistoryDb::from_sessions(&sessions, index.docs());
    let mut feedback = FeedbackIndex::new();
    for r in &log.records {
        feedback.record(&r.user_id, &r.doc_id, r.event_type);
    }
    let ctx = ScoringContext {
        index: &index,
        taxonomy: &taxonomy,
        time_db: &model.time_db,
        history: &history,
        feedback: &feedback,
    };
    for r in log.records.iter().take(50) {
        let Ok(query) = parse_query(&r.query) else {
            continue;
        };
        let ranked = rank(&query, &r.user_id, &ctx, &model.net).unwrap();
        let mut got: Vec<&str> = ranked.entries.iter().map(|e| e.doc_id.as_str()).collect();
        got.sort_unstable();
        let mut want: Vec<&str> = index
            .candidates(&query)
            .iter()
            .map(|&i| index.doc(i).doc_id.as_str())
            .collect();
        want.sort_unstable();
        assert_eq!(got, want);
        assert!(ranked.entries.windows(2).all(|w| w[0].score >= w[1].score));
    }
}

#[test]
fn every_title_word_retrieves_its_book() {
    let taxonomy = Taxonomy::books();
    let index = CatalogIndex::new(synth::generate_catalog(0, 600, &taxonomy));
    for (i, doc) in index.docs().iter().enumerate() {
        for word in tokenize(&doc.title) {
            let query = parse_query(&word).unwrap();
            assert!(
                index.candidates(&query).contains(&i),
                "{word} misses {}",
                doc.doc_id
            );
        }
    }
}
