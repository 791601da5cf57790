use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use persona_core::corpus::{
    generate_synthetic, load_corpus, synthetic_lexicon, synthetic_table, truncate_tweets, write_corpus, Corpus,
    LoadOptions, SyntheticConfig, SYNTHETIC_SIGNAL_STD,
};
use persona_core::eval::{
    run_full_setting, run_reallife_setting, run_sampling_setting, write_report_csv, EvalConfig, Method, ReportRow,
    Resources, SamplingAggregation, SamplingConfig, SamplingCurve,
};
use persona_core::features::{
    build_ngram_vocab, coverage_report, load_embeddings, load_lexicon, CoverageReport, CoverageSource, NgramOptions,
};
use persona_core::models::{train_big5, TrainConfig, ValidationSplit};
use persona_core::preprocess::{clean_tweet_with, preprocess_user, CleanOptions, HashtagMode};
use persona_core::{
    EmbeddingTable, Error, FeatureConfig, FeatureKind, Featurizer, Lexicon, ModelKind, TokenStream, Trait,
    TraitModelBundle,
};

use crate::opts::{existing, Opts};
use crate::{svg, CleanArgs, Failure, Hashtags, Setting, SynthArgs};

fn log(msg: impl AsRef<str>) {
    eprintln!("[persona] {}", msg.as_ref());
}

/// Writes through a sibling temporary file so readers never see a partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let io_err = |e| Failure::Io(path.to_owned(), e);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Failure::Io(tmp.clone(), e))?;
    fs::rename(&tmp, path).map_err(io_err)?;
    log(format!("wrote {}", path.display()));
    Ok(())
}

fn load(opts: &Opts, path: &Path) -> Result<Corpus, Failure> {
    let corpus = load_corpus(
        path,
        &LoadOptions {
            min_tweets: opts.min_tweets.unwrap_or(0),
            drop_retweets: opts.drop_retweets,
            ..Default::default()
        },
    )?;
    let s = &corpus.summary;
    log(format!(
        "{}: {} users kept of {}, {} below --min-tweets, {} retweets removed",
        path.display(),
        s.kept,
        s.lines,
        s.dropped_short,
        s.retweets_removed
    ));
    Ok(corpus)
}

fn corpus_arg(opts: &Opts) -> Result<PathBuf, Failure> {
    existing(&opts.corpus, "--corpus", "for this command")
}

fn embeddings(opts: &Opts) -> Result<EmbeddingTable, Failure> {
    let path = existing(&opts.embeddings, "--embeddings", "for embedding features")?;
    let table = load_embeddings(&path, None)?;
    log(format!("{}: {} vectors of dimension {}", path.display(), table.len(), table.dim()));
    Ok(table)
}

fn lexicon(opts: &Opts) -> Result<Lexicon, Failure> {
    let path = existing(&opts.lexicon, "--lexicon", "for lexicon features")?;
    let lex = load_lexicon(&path)?;
    log(format!(
        "{}: {} categories, {} patterns",
        path.display(),
        lex.categories().len(),
        lex.pattern_count()
    ));
    Ok(lex)
}

fn streams(corpus: &Corpus) -> Vec<TokenStream> {
    corpus.records.iter().map(|r| preprocess_user(&r.tweets)).collect()
}

pub fn clean(opts: &Opts, args: &CleanArgs) -> Result<(), Failure> {
    let clean = CleanOptions {
        hashtags: match args.hashtags {
            Hashtags::Drop => HashtagMode::DropToken,
            Hashtags::Strip => HashtagMode::StripMarker,
        },
        drop_mentions: args.drop_mentions,
    };
    match &opts.corpus {
        Some(_) => {
            let mut corpus = load(opts, &corpus_arg(opts)?)?;
            for r in &mut corpus.records {
                for t in &mut r.tweets {
                    *t = clean_tweet_with(t, &clean);
                }
            }
            let mut buf = Vec::new();
            write_corpus(&mut buf, &corpus.records).map_err(|e| Failure::Io("<buffer>".into(), e))?;
            write_atomic(&opts.out_dir()?.join("cleaned.jsonl"), &buf)
        }
        None => {
            let stdin = io::stdin().lock();
            let mut stdout = io::stdout().lock();
            let err = |e| Failure::Io("<stdio>".into(), e);
            for line in stdin.lines() {
                writeln!(stdout, "{}", clean_tweet_with(&line.map_err(err)?, &clean)).map_err(err)?;
            }
            stdout.flush().map_err(err)
        }
    }
}

pub fn synth(opts: &Opts, args: &SynthArgs) -> Result<(), Failure> {
    let out = opts.out_dir()?;
    let seed = opts.seed();
    let table = synthetic_table(args.vocab, args.dim, seed)?;
    let lex = synthetic_lexicon(&table, args.categories, seed)?;
    let cfg = SyntheticConfig {
        n_users: args.users + args.test_users,
        tweets_per_user: args.tweets,
        noise_std: args.noise.unwrap_or(SYNTHETIC_SIGNAL_STD),
        seed,
        ..Default::default()
    };
    let users = generate_synthetic(&table, &cfg)?;
    let (train, test) = users.split_at(args.users);

    let io_buf = |e| Failure::Io("<buffer>".into(), e);
    let mut buf = Vec::new();
    write_corpus(&mut buf, train).map_err(io_buf)?;
    write_atomic(&out.join("corpus.jsonl"), &buf)?;
    if !test.is_empty() {
        let test = truncate_tweets(test, args.test_tweets_mean, args.test_tweets_std, seed)?;
        let mut buf = Vec::new();
        write_corpus(&mut buf, &test).map_err(io_buf)?;
        write_atomic(&out.join("test.jsonl"), &buf)?;
    }
    let mut buf = Vec::new();
    table.write_text(&mut buf).map_err(io_buf)?;
    write_atomic(&out.join("embeddings.txt"), &buf)?;
    let mut buf = Vec::new();
    lex.write_text(&mut buf).map_err(io_buf)?;
    write_atomic(&out.join("lexicon.tsv"), &buf)
}

pub fn train(opts: &Opts) -> Result<(), Failure> {
    let kind = opts.features()?.unwrap_or(FeatureKind::Embedding);
    let model = opts.model()?.unwrap_or(ModelKind::Gp);
    let out = opts.out_dir()?;
    let table = match kind {
        FeatureKind::Embedding => Some(embeddings(opts)?),
        _ => None,
    };
    let lex = match kind {
        FeatureKind::Lexicon => Some(lexicon(opts)?),
        _ => None,
    };
    let corpus = load(opts, &corpus_arg(opts)?)?;
    let streams = streams(&corpus);
    let mut res = Resources::new(table.as_ref(), lex.as_ref());
    res.oov = opts.oov()?;
    let refs: Vec<&TokenStream> = streams.iter().collect();
    let featurizer = res.featurizer(kind, &refs)?;
    let features = streams.iter().map(|s| featurizer.extract(s)).collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = corpus.records.iter().map(|r| r.user_id.clone()).collect();
    let traits: Vec<_> = corpus.records.iter().map(|r| r.traits).collect();

    let mut cfg = TrainConfig::new(model, opts.seed());
    cfg.validation = ValidationSplit::ById {
        fraction: opts.val_fraction(),
        seed: opts.seed(),
    };
    log(format!("training {kind}+{model} on {} users", ids.len()));
    let bundle = train_big5(&ids, &features, &traits, featurizer.config(), &cfg)?;
    write_atomic(&out.join("bundle.json"), bundle.to_json()?.as_bytes())?;

    let coverage = coverage_for(&featurizer, &streams)?;
    let hyper: serde_json::Map<String, serde_json::Value> = bundle
        .traits
        .iter()
        .map(|(t, m)| (t.key().to_owned(), m.hyperparameters()))
        .collect();
    let summary = serde_json::json!({
        "method": format!("{kind}+{model}"),
        "users": ids.len(),
        "seed": opts.seed(),
        "fingerprint": bundle.fingerprint,
        "coverage": coverage,
        "hyperparameters": hyper,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(Error::from)?;
    write_atomic(&out.join("train_summary.json"), format!("{text}\n").as_bytes())
}

fn coverage_for(featurizer: &Featurizer<'_>, streams: &[TokenStream]) -> Result<CoverageReport, Failure> {
    let source = match featurizer {
        Featurizer::Embedding(t, _) => CoverageSource::Embedding(t),
        Featurizer::Lexicon(l) => CoverageSource::Lexicon(l),
        Featurizer::Ngram(v) => CoverageSource::Ngram(v),
    };
    Ok(coverage_report(streams, source)?)
}

pub fn predict(opts: &Opts) -> Result<(), Failure> {
    let out = opts.out_dir()?;
    let bundle_path = existing(&opts.bundle, "--bundle", "for prediction")?;
    let bundle = TraitModelBundle::load(&bundle_path)?;
    let table;
    let lex;
    let featurizer = match &bundle.feature_config {
        FeatureConfig::Embedding { table_digest, oov, .. } => {
            table = embeddings(opts)?;
            if table.digest() != table_digest {
                return Err(Error::Bundle(format!(
                    "embedding table digest {} does not match the bundle's {table_digest}",
                    table.digest()
                ))
                .into());
            }
            Featurizer::Embedding(&table, *oov)
        }
        FeatureConfig::Lexicon { lexicon_digest, .. } => {
            lex = lexicon(opts)?;
            if &lex.digest() != lexicon_digest {
                return Err(Error::Bundle(format!(
                    "lexicon digest {} does not match the bundle's {lexicon_digest}",
                    lex.digest()
                ))
                .into());
            }
            Featurizer::Lexicon(&lex)
        }
        FeatureConfig::Ngram { vocab } => Featurizer::Ngram(vocab.clone()),
    };
    let corpus = load(opts, &corpus_arg(opts)?)?;

    let mut preds = String::from("user_id,o,c,e,a,n\n");
    let mut errors = String::from("user_id,error\n");
    let mut failed = 0;
    for r in &corpus.records {
        match featurizer.extract(&preprocess_user(&r.tweets)) {
            Ok(f) => {
                let s = bundle.predict(&f)?;
                preds.push_str(&csv_field(&r.user_id));
                for t in Trait::ALL {
                    preds.push_str(&format!(",{}", s.get(t)));
                }
                preds.push('\n');
            }
            Err(e @ Error::NoCoveredTokens) => {
                failed += 1;
                errors.push_str(&format!("{},{e}\n", csv_field(&r.user_id)));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if failed > 0 {
        log(format!("{failed} users had no covered tokens; see errors.csv"));
    }
    write_atomic(&out.join("predictions.csv"), preds.as_bytes())?;
    write_atomic(&out.join("errors.csv"), errors.as_bytes())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn coverage(opts: &Opts) -> Result<(), Failure> {
    let out = opts.out_dir()?;
    let kinds: Vec<FeatureKind> = match opts.features()? {
        Some(k) => vec![k],
        None => {
            let mut ks = Vec::new();
            if opts.embeddings.is_some() {
                ks.push(FeatureKind::Embedding);
            }
            if opts.lexicon.is_some() {
                ks.push(FeatureKind::Lexicon);
            }
            ks.push(FeatureKind::Ngram);
            ks
        }
    };
    let corpus = load(opts, &corpus_arg(opts)?)?;
    let streams = streams(&corpus);
    let mut rows = Vec::new();
    for kind in kinds {
        let report = match kind {
            FeatureKind::Embedding => coverage_report(&streams, CoverageSource::Embedding(&embeddings(opts)?))?,
            FeatureKind::Lexicon => coverage_report(&streams, CoverageSource::Lexicon(&lexicon(opts)?))?,
            FeatureKind::Ngram => {
                let vocab = build_ngram_vocab(&streams, &NgramOptions::default())?;
                coverage_report(&streams, CoverageSource::Ngram(&vocab))?
            }
        };
        let multi = report.fractions.len() > 1;
        for (i, f) in report.fractions.iter().enumerate() {
            let scope = if multi { format!("n{}", i + 1) } else { "all".into() };
            log(format!(
                "{kind} {scope}: {:.4} ({} of {} tokens)",
                f, report.matched[i], report.total[i]
            ));
            rows.push(ReportRow {
                setting: "coverage".into(),
                method: String::new(),
                feature: kind.to_string(),
                trait_key: scope,
                metric: "coverage".into(),
                value: *f,
                n: report.total[i],
                p_value: None,
                tweet_count: None,
                replicate: None,
            });
        }
    }
    write_rows(&out.join("coverage.csv"), &rows)
}

fn write_rows(path: &Path, rows: &[ReportRow]) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_report_csv(&mut buf, rows)?;
    write_atomic(path, &buf)
}

pub fn eval(opts: &Opts, setting: Setting, average_predictions: bool) -> Result<(), Failure> {
    let out = opts.out_dir()?;
    let available: Vec<Method> = Method::all()
        .into_iter()
        .filter(|m| match m.feature {
            FeatureKind::Embedding => opts.embeddings.is_some(),
            FeatureKind::Lexicon => opts.lexicon.is_some(),
            FeatureKind::Ngram => true,
        })
        .collect();
    let methods = opts.methods(available)?;
    if methods.is_empty() {
        return Err(Failure::Usage("no methods selected".into()));
    }
    let table = match methods.iter().any(|m| m.feature == FeatureKind::Embedding) {
        true => Some(embeddings(opts)?),
        false => None,
    };
    let lex = match methods.iter().any(|m| m.feature == FeatureKind::Lexicon) {
        true => Some(lexicon(opts)?),
        false => None,
    };
    let mut res = Resources::new(table.as_ref(), lex.as_ref());
    res.oov = opts.oov()?;
    let mut cfg = EvalConfig::new(opts.seed());
    cfg.folds = opts.folds();
    cfg.val_fraction = opts.val_fraction();
    let names: Vec<String> = methods.iter().map(Method::to_string).collect();

    match setting {
        Setting::Full => {
            let corpus = load(opts, &corpus_arg(opts)?)?;
            log(format!("{}-fold evaluation of {}", cfg.folds, names.join(", ")));
            let report = run_full_setting(&corpus.records, &methods, &res, &cfg)?;
            for m in &report.methods {
                log(format!("{}: mean r {:.4}, mean MAE {:.4}", m.method, m.mean_r, m.mean_mae));
            }
            write_rows(&out.join("report.csv"), &report.to_rows())
        }
        Setting::Sampling => {
            let corpus = load(opts, &corpus_arg(opts)?)?;
            let scfg = SamplingConfig {
                tweet_counts: opts.tweet_counts()?,
                n_subsets: opts.subsets(),
                aggregation: if average_predictions {
                    SamplingAggregation::AveragePredictions
                } else {
                    SamplingAggregation::PerReplicate
                },
            };
            log(format!(
                "sampling {:?} tweets, {} subsets, for {}",
                scfg.tweet_counts,
                scfg.n_subsets,
                names.join(", ")
            ));
            let curves = run_sampling_setting(&corpus.records, &methods, &res, &cfg, &scfg)?;
            for c in &curves {
                let rs: Vec<String> = c.points.iter().map(|p| format!("{:.3}", p.mean_r)).collect();
                log(format!("{}: {}", c.method, rs.join(" ")));
            }
            let rows: Vec<ReportRow> = curves
                .iter()
                .flat_map(|c: &SamplingCurve| c.to_rows(corpus.records.len()))
                .collect();
            write_rows(&out.join("report.csv"), &rows)?;
            write_atomic(&out.join("sampling.svg"), svg::sampling_chart(&curves).as_bytes())
        }
        Setting::Reallife => {
            let train = load(opts, &corpus_arg(opts)?)?;
            let test_path = existing(&opts.test_corpus, "--test-corpus", "for the real-life setting")?;
            let test = load(opts, &test_path)?;
            let report = run_reallife_setting(&train.records, &test.records, &methods, &res, &cfg)?;
            for m in &report.methods {
                log(format!("{}: MAE {:.4}", m.method, m.mae));
            }
            log(format!(
                "ANOVA F({}, {}) = {:.4}, p = {:.4}",
                report.anova.df_between, report.anova.df_within, report.anova.f, report.anova.p
            ));
            write_rows(&out.join("report.csv"), &report.to_rows())
        }
    }
}
