use std::fs;

use persona_core::corpus::{
    generate_synthetic, load_corpus, save_corpus, synthetic_lexicon, synthetic_table, LoadOptions, SyntheticConfig,
};
use persona_core::eval::{make_folds, run_full_setting, EvalConfig, Method, Resources};
use persona_core::features::{load_embeddings, load_lexicon};
use persona_core::models::{train_big5, TrainConfig};
use persona_core::preprocess::preprocess_user;
use persona_core::{Error, FeatureKind, Featurizer, ModelKind, OovPolicy, Trait, TraitModelBundle};

fn small_corpus(seed: u64) -> (persona_core::EmbeddingTable, Vec<persona_core::UserRecord>) {
    let table = synthetic_table(500, 8, seed).unwrap();
    let cfg = SyntheticConfig {
        n_users: 40,
        tweets_per_user: 30,
        seed,
        ..Default::default()
    };
    let records = generate_synthetic(&table, &cfg).unwrap();
    (table, records)
}

#[test]
fn text_resources_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let (table, records) = small_corpus(1);
    let lex = synthetic_lexicon(&table, 6, 1).unwrap();

    let emb_path = dir.path().join("emb.txt");
    let mut buf = Vec::new();
    table.write_text(&mut buf).unwrap();
    fs::write(&emb_path, buf).unwrap();
    assert_eq!(load_embeddings(&emb_path, Some(8)).unwrap().digest(), table.digest());
    assert!(matches!(load_embeddings(&emb_path, Some(9)), Err(Error::Parse { .. }) | Err(Error::DimensionMismatch { .. })));

    let lex_path = dir.path().join("lex.tsv");
    let mut buf = Vec::new();
    lex.write_text(&mut buf).unwrap();
    fs::write(&lex_path, buf).unwrap();
    assert_eq!(load_lexicon(&lex_path).unwrap().digest(), lex.digest());

    let corpus_path = dir.path().join("corpus.jsonl");
    save_corpus(&corpus_path, &records).unwrap();
    let back = load_corpus(&corpus_path, &LoadOptions::default()).unwrap();
    assert_eq!(back.records, records);
    assert_eq!(back.summary.kept, records.len());
}

#[test]
fn min_tweets_filter_applies_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut records) = small_corpus(2);
    records[0].tweets.truncate(3);
    let path = dir.path().join("c.jsonl");
    save_corpus(&path, &records).unwrap();
    let opts = LoadOptions {
        min_tweets: 10,
        ..Default::default()
    };
    let loaded = load_corpus(&path, &opts).unwrap();
    assert_eq!(loaded.records.len(), records.len() - 1);
    assert_eq!(loaded.summary.dropped_short, 1);
    assert!(loaded.records.iter().all(|r| r.user_id != records[0].user_id));
}

#[test]
fn folds_partition_users() {
    let plan = make_folds(53, 10, 0.25, 7).unwrap();
    let mut seen = vec![0; 53];
    for f in &plan.folds {
        for &u in &f.test {
            seen[u] += 1;
        }
        let training = f.training();
        assert!(f.test.iter().all(|u| training.binary_search(u).is_err()));
        assert_eq!(training.len() + f.test.len(), 53);
        assert!(!f.validation.is_empty() && !f.fit.is_empty());
    }
    assert!(seen.iter().all(|&c| c == 1));
    assert_eq!(plan, make_folds(53, 10, 0.25, 7).unwrap());
}

#[test]
fn bundle_file_predicts_like_the_trained_models() {
    let dir = tempfile::tempdir().unwrap();
    let (table, records) = small_corpus(3);
    let (train, probe) = records.split_at(30);
    let featurizer = Featurizer::Embedding(&table, OovPolicy::Error);
    let features: Vec<_> = train.iter().map(|r| featurizer.extract(&preprocess_user(&r.tweets)).unwrap()).collect();
    let ids: Vec<String> = train.iter().map(|r| r.user_id.clone()).collect();
    let traits: Vec<_> = train.iter().map(|r| r.traits).collect();
    for model in [ModelKind::Gp, ModelKind::Ridge] {
        let bundle = train_big5(&ids, &features, &traits, featurizer.config(), &TrainConfig::new(model, 3)).unwrap();
        let path = dir.path().join(format!("{model}.json"));
        bundle.save(&path).unwrap();
        let loaded = TraitModelBundle::load(&path).unwrap();
        assert_eq!(loaded.method, model);
        for r in probe {
            let x = featurizer.extract(&preprocess_user(&r.tweets)).unwrap();
            let (a, b) = (bundle.predict(&x).unwrap(), loaded.predict(&x).unwrap());
            for t in Trait::ALL {
                assert_eq!(a.get(t).to_bits(), b.get(t).to_bits());
            }
        }
    }
}

#[test]
fn full_setting_reports_every_method() {
    let (table, records) = small_corpus(4);
    let lex = synthetic_lexicon(&table, 6, 4).unwrap();
    let res = Resources::new(Some(&table), Some(&lex));
    let methods = [
        Method::new(FeatureKind::Lexicon, ModelKind::Ridge),
        Method::new(FeatureKind::Ngram, ModelKind::Ridge),
        Method::new(FeatureKind::Embedding, ModelKind::Gp),
    ];
    let mut cfg = EvalConfig::new(4);
    cfg.folds = 4;
    let report = run_full_setting(&records, &methods, &res, &cfg).unwrap();
    assert_eq!(report.methods.len(), 3);
    assert_eq!(report.audits.len(), 3 * 4);
    for m in &report.methods {
        assert_eq!(m.predictions.len(), records.len());
        assert!(m.mean_mae.is_finite() && m.mean_r.abs() <= 1.0);
    }
    let again = run_full_setting(&records, &methods, &res, &cfg).unwrap();
    assert_eq!(report, again);
}
