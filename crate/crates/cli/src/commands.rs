use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use narrclause::classifier::{
    evaluate, load_checkpoint, save_checkpoint, AgreementFilter, BaselineKind, ClauseClassifier, CnnClassifier,
    ConstantClassifier, EmbeddingSource, EvalReport, FeatureBaseline, LABEL_ORDER,
};
use narrclause::corpus::{
    agreement_counts, aggregate_corpus, all_clauses, corpus_stats, label_distribution, load_corpus,
    split_dataset, write_corpus, Clause, ClauseType, DatasetSplit, Story,
};
use narrclause::features::PosTagset;
use narrclause::matcher::{
    aspect_mention_report, detection_report, encode_corpus, load_choice_records, pair_score_encoded,
    select_distractor_story, select_exclusive_pairs, Aspect, DistractorChoice, MeanWordVectorEncoder,
    PairScore, PairSelection, PrecomputedEncoder, SentenceEncoder,
};
use narrclause::treebank::{read_tree_file, segment_story, spans_to_story};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Baseline, Cli, Command, EncoderArgs, Partition, ReportKind, EXIT_DATA, EXIT_INTERNAL, EXIT_USAGE};

/// Flag combinations that parse but make no sense together.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Input that is well-formed but inconsistent, e.g. an unknown story id.
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>()
            || cause.is::<narrclause::Error>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut config = RunConfig::load(cli.global.config.as_deref()).map_err(|e| UsageError(format!("{e:#}")))?;
    config.set_seed(cli.global.seed);
    match cli.command {
        Command::Split { trees, out } => {
            config.command = "split".into();
            config.paths.trees = Some(trees.clone());
            config.paths.output = Some(out.clone());
            split(&config, &trees, &out)
        }
        Command::Aggregate { corpus, out } => {
            config.command = "aggregate".into();
            config.paths.corpus = Some(corpus.clone());
            config.paths.output = out.clone();
            aggregate(&config, &corpus, out.as_deref())
        }
        Command::Stats { corpus, top_k, words, out } => {
            config.command = "stats".into();
            config.paths.corpus = Some(corpus.clone());
            config.paths.output = out.clone();
            stats(&config, &corpus, top_k, &words, out.as_deref())
        }
        Command::Train {
            corpus,
            out,
            embeddings,
            epochs,
            learning_rate,
            batch_size,
            patience,
            min_agreement,
            quiet,
        } => {
            config.command = "train".into();
            config.paths.corpus = Some(corpus.clone());
            config.paths.output = Some(out.clone());
            if embeddings.is_some() {
                config.paths.embeddings = embeddings;
            }
            let t = &mut config.training;
            t.max_epochs = epochs.unwrap_or(t.max_epochs);
            t.learning_rate = learning_rate.unwrap_or(t.learning_rate);
            t.batch_size = batch_size.unwrap_or(t.batch_size);
            if let Some(p) = patience {
                t.patience = (p > 0).then_some(p);
            }
            if let Some(a) = min_agreement {
                config.split.min_agreement = a;
            }
            train(&config, &corpus, &out, quiet)
        }
        Command::Evaluate { corpus, checkpoint, baseline, agreement, partition, tagset, out } => {
            config.command = "evaluate".into();
            config.paths.corpus = Some(corpus.clone());
            config.paths.checkpoint = checkpoint.clone();
            config.paths.output = out.clone();
            if tagset.is_some() {
                config.paths.tagset = tagset;
            }
            let filter: AgreementFilter = agreement.parse().map_err(|e| usage(format!("--agreement: {e}")))?;
            evaluate_cmd(&config, &corpus, checkpoint.as_deref(), baseline, filter, partition, out.as_deref())
        }
        Command::Predict { corpus, checkpoint, out } => {
            config.command = "predict".into();
            config.paths.corpus = Some(corpus.clone());
            config.paths.checkpoint = Some(checkpoint.clone());
            config.paths.output = Some(out.clone());
            predict(&config, &corpus, &checkpoint, &out)
        }
        Command::Match { corpus, story_a, story_b, aspect, encoder, out } => {
            config.command = "match".into();
            config.paths.corpus = Some(corpus.clone());
            config.paths.output = out.clone();
            if let Some(a) = aspect {
                config.matcher.aspect = a;
            }
            let aspect: Aspect = config.matcher.aspect.parse().map_err(|e| usage(format!("--aspect: {e}")))?;
            let stories = labeled_corpus(&mut config, &corpus, &encoder)?;
            let encoder = build_encoder(&mut config, &encoder)?;
            let encoded = encode_corpus(&stories, encoder.as_ref())?;
            let find = |id: &str| {
                encoded
                    .iter()
                    .find(|s| s.story_id == id)
                    .ok_or_else(|| anyhow!(DataError(format!("story `{id}` not in corpus"))))
            };
            let score = pair_score_encoded(find(&story_a)?, find(&story_b)?, aspect)?;
            if let Some(out) = &out {
                write_json(out, &score)?;
                config.write_beside(out)?;
            }
            println!("{} vs {} at {}: {:.6}", score.story_a, score.story_b, aspect, score.score);
            Ok(())
        }
        Command::SelectPairs { corpus, aspect, threshold, n, distractors, encoder, out } => {
            config.command = "select-pairs".into();
            config.paths.corpus = Some(corpus.clone());
            config.paths.output = Some(out.clone());
            if let Some(a) = aspect {
                config.matcher.aspect = a;
            }
            config.matcher.threshold = threshold.unwrap_or(config.matcher.threshold);
            config.matcher.n = n.unwrap_or(config.matcher.n);
            let aspect = match config.matcher.aspect.parse::<Aspect>() {
                Ok(Aspect::Only(t)) => t,
                _ => return Err(usage("--aspect must be action, evaluation or orientation")),
            };
            let stories = labeled_corpus(&mut config, &corpus, &encoder)?;
            let encoder = build_encoder(&mut config, &encoder)?;
            select_pairs(&config, &stories, encoder.as_ref(), aspect, distractors, &out)
        }
        Command::Report { records, kind, out_dir } => {
            config.command = "report".into();
            config.paths.records = Some(records.clone());
            config.paths.output = out_dir.clone();
            report(&config, &records, kind, out_dir.as_deref())
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_aggregated(config: &RunConfig, path: &Path) -> Result<Vec<Story>> {
    let mut corpus = load_corpus(path)?;
    aggregate_corpus(&mut corpus, config.seed)?;
    Ok(corpus)
}

fn split(config: &RunConfig, trees: &Path, out: &Path) -> Result<()> {
    let stories = read_tree_file(trees)?;
    let mut corpus = Vec::with_capacity(stories.len());
    let mut sentences = 0;
    for s in &stories {
        sentences += s.trees.len();
        let spans = segment_story(&s.trees).with_context(|| format!("story `{}`", s.story_id))?;
        corpus.push(spans_to_story(&s.story_id, &spans));
    }
    write_corpus(out, &corpus)?;
    config.write_beside(out)?;
    println!(
        "{} stories, {sentences} sentences, {} clauses -> {}",
        corpus.len(),
        all_clauses(&corpus).count(),
        out.display()
    );
    Ok(())
}

fn aggregate(config: &RunConfig, path: &Path, out: Option<&Path>) -> Result<()> {
    let corpus = load_aggregated(config, path)?;
    let dist = label_distribution(&corpus)?;
    let counts = agreement_counts(&corpus)?;
    println!("{:<12} {:>7} {:>8} {:>15}", "label", "count", "share", "mean agreement");
    for (label, stat) in &dist {
        let mean = stat.mean_agreement.map_or_else(|| "n/a".to_string(), |m| format!("{m:.2}"));
        println!("{:<12} {:>7} {:>7.1}% {:>15}", label.as_str(), stat.count, 100.0 * stat.fraction, mean);
    }
    println!(
        "{} annotated clauses, {} with agreement >= 2, {} unanimous, mean agreement {:.2}",
        counts.total, counts.at_least_two, counts.unanimous, counts.mean_agreement
    );
    if let Some(out) = out {
        write_corpus(out, &corpus)?;
        config.write_beside(out)?;
    }
    Ok(())
}

fn stats(config: &RunConfig, path: &Path, top_k: usize, words: &[String], out: Option<&Path>) -> Result<()> {
    let corpus = load_corpus(path)?;
    let words: Vec<&str> = words.iter().map(String::as_str).collect();
    let report = corpus_stats(&corpus, top_k, &words)?;
    println!(
        "{} stories, {} clauses, {} tokens; {:.2} clauses per story, {:.2} tokens per clause",
        report.stories, report.clauses, report.tokens, report.mean_clauses_per_story, report.mean_tokens_per_clause
    );
    for b in &report.top_bigrams {
        println!("{:>7}  {:>6.3}%  {} {}", b.count, 100.0 * b.fraction, b.first, b.second);
    }
    for (w, f) in &report.word_frequency_per_story {
        println!("{w}: {f:.3} per story");
    }
    if let Some(out) = out {
        write_json(out, &report)?;
        config.write_beside(out)?;
    }
    Ok(())
}

fn train(config: &RunConfig, path: &Path, out: &Path, quiet: bool) -> Result<()> {
    let corpus = load_aggregated(config, path)?;
    let split = split_dataset(&corpus, &config.split)?;
    let [train_set, validation, _] = split.resolve(&corpus);
    let embeddings = match &config.paths.embeddings {
        Some(p) => EmbeddingSource::File(p),
        None => EmbeddingSource::Random,
    };
    let (classifier, log) = CnnClassifier::fit_with_progress(
        &train_set,
        &validation,
        &config.features,
        &config.model,
        &config.training,
        embeddings,
        |e| {
            if !quiet {
                eprintln!(
                    "epoch {:>3}  loss {:.4}  validation error {:.2}%  validation loss {:.4}",
                    e.epoch,
                    e.train_loss,
                    100.0 * e.validation_error,
                    e.validation_loss
                );
            }
        },
    )?;
    save_checkpoint(&classifier, out)?;
    write_json(&out.join("split.json"), &split)?;
    write_json(&out.join("train_log.json"), &log)?;
    config.write_beside(out)?;
    println!(
        "trained on {} clauses; best epoch {} with validation error {:.2}% on {} clauses -> {}",
        train_set.len(),
        log.best_epoch,
        100.0 * log.best_validation_error,
        validation.len(),
        out.display()
    );
    Ok(())
}

/// The split saved with a checkpoint, else a fresh one from the config.
fn resolve_split(config: &RunConfig, corpus: &[Story], checkpoint: Option<&Path>) -> Result<DatasetSplit> {
    if let Some(dir) = checkpoint {
        let saved = dir.join("split.json");
        if saved.exists() {
            let text = fs::read_to_string(&saved).with_context(|| format!("reading {}", saved.display()))?;
            return Ok(serde_json::from_str(&text)?);
        }
    }
    Ok(split_dataset(corpus, &config.split)?)
}

fn partition<'a>(split: &DatasetSplit, corpus: &'a [Story], which: Partition) -> Vec<&'a Clause> {
    let [train, validation, test] = split.resolve(corpus);
    match which {
        Partition::Train => train,
        Partition::Validation => validation,
        Partition::Test => test,
        Partition::All => {
            let mut all = train;
            all.extend(validation);
            all.extend(test);
            all
        }
    }
}

fn majority_label(clauses: &[&Clause]) -> Result<ClauseType> {
    LABEL_ORDER
        .iter()
        .copied()
        .max_by_key(|&l| (clauses.iter().filter(|c| c.gold == Some(l)).count(), std::cmp::Reverse(l)))
        .filter(|_| !clauses.is_empty())
        .ok_or_else(|| anyhow!(DataError("empty training partition".into())))
}

fn evaluate_cmd(
    config: &RunConfig,
    path: &Path,
    checkpoint: Option<&Path>,
    baseline: Option<Baseline>,
    filter: AgreementFilter,
    which: Partition,
    out: Option<&Path>,
) -> Result<()> {
    let corpus = load_aggregated(config, path)?;
    let split = resolve_split(config, &corpus, checkpoint)?;
    let clauses = partition(&split, &corpus, which);
    let train_set = partition(&split, &corpus, Partition::Train);
    let tagset = match &config.paths.tagset {
        Some(p) => PosTagset::from_file(p)?,
        None => PosTagset::penn(),
    };
    let classifier: Box<dyn ClauseClassifier> = match (checkpoint, baseline) {
        (Some(dir), _) => Box::new(load_checkpoint(dir)?),
        (None, Some(Baseline::Majority)) => Box::new(ConstantClassifier(majority_label(&train_set)?)),
        (None, Some(Baseline::Svm)) => {
            Box::new(FeatureBaseline::fit(BaselineKind::LinearSvmL1, &train_set, tagset, config.seed)?)
        }
        (None, Some(Baseline::Rf)) => {
            Box::new(FeatureBaseline::fit(BaselineKind::RandomForest, &train_set, tagset, config.seed)?)
        }
        (None, None) => return Err(usage("give --checkpoint or --baseline")),
    };
    let report: EvalReport = evaluate(classifier.as_ref(), &clauses, filter)?;
    println!("{report}");
    if let Some(out) = out {
        write_json(out, &report)?;
        config.write_beside(out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    clause_id: &'a str,
    text: String,
    predicted: ClauseType,
    probabilities: std::collections::BTreeMap<&'static str, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold: Option<ClauseType>,
}

fn predict(config: &RunConfig, path: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let corpus = load_aggregated(config, path)?;
    let classifier = load_checkpoint(checkpoint)?;
    let mut w = create(out)?;
    let mut counts = [0usize; 3];
    for clause in all_clauses(&corpus) {
        let probs = classifier.probabilities(clause)?;
        let k = narrclause::classifier::argmax(&probs);
        counts[k] += 1;
        let rec = Prediction {
            clause_id: &clause.clause_id,
            text: clause.text(),
            predicted: LABEL_ORDER[k],
            probabilities: LABEL_ORDER.iter().map(|l| l.as_str()).zip(probs).collect(),
            gold: clause.gold,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    config.write_beside(out)?;
    println!(
        "{} clauses: {} action, {} evaluation, {} orientation -> {}",
        counts.iter().sum::<usize>(),
        counts[0],
        counts[1],
        counts[2],
        out.display()
    );
    Ok(())
}

/// Aggregated corpus; with a checkpoint, every clause also gets a predicted
/// label, which the matcher uses where gold is missing.
fn labeled_corpus(config: &mut RunConfig, path: &Path, args: &EncoderArgs) -> Result<Vec<Story>> {
    let mut corpus = load_aggregated(config, path)?;
    if let Some(dir) = &args.checkpoint {
        config.paths.checkpoint = Some(dir.clone());
        let classifier = load_checkpoint(dir)?;
        for story in &mut corpus {
            let refs: Vec<&Clause> = story.clauses.iter().collect();
            let labels = classifier.predict(&refs)?;
            for (c, l) in story.clauses.iter_mut().zip(labels) {
                c.predicted = Some(l);
            }
        }
    }
    Ok(corpus)
}

fn build_encoder(config: &mut RunConfig, args: &EncoderArgs) -> Result<Box<dyn SentenceEncoder>> {
    let given = [args.vectors.is_some(), args.embeddings.is_some()].iter().filter(|&&b| b).count();
    if given > 1 {
        return Err(usage("give at most one of --vectors and --embeddings"));
    }
    if let Some(p) = &args.vectors {
        config.matcher.encoder = "precomputed".into();
        config.paths.vectors = Some(p.clone());
        return Ok(Box::new(PrecomputedEncoder::from_jsonl(p)?));
    }
    if let Some(p) = &args.embeddings {
        config.matcher.encoder = "word-vectors".into();
        config.paths.embeddings = Some(p.clone());
        return Ok(Box::new(MeanWordVectorEncoder::from_file(p, args.dim, config.features.fold_case)?));
    }
    if let Some(dir) = &args.checkpoint {
        config.matcher.encoder = "checkpoint".into();
        let c = load_checkpoint(dir)?;
        return Ok(Box::new(MeanWordVectorEncoder::from_embedding(&c.featurizer.vocab, &c.model.embedding)));
    }
    Err(usage("an encoder is required: --vectors, --embeddings or --checkpoint"))
}

#[derive(Serialize)]
struct SelectedPair {
    #[serde(flatten)]
    pair: PairScore,
    #[serde(skip_serializing_if = "Option::is_none")]
    distractor: Option<DistractorChoice>,
}

fn select_pairs(
    config: &RunConfig,
    corpus: &[Story],
    encoder: &dyn SentenceEncoder,
    aspect: ClauseType,
    distractors: bool,
    out: &Path,
) -> Result<()> {
    let encoded = encode_corpus(corpus, encoder)?;
    let selection = PairSelection {
        threshold: config.matcher.threshold,
        allow_empty: true,
        ..PairSelection::new(aspect, config.matcher.n, config.seed)
    };
    let pairs = select_exclusive_pairs(&encoded, &selection)?;
    let mut w = create(out)?;
    let mut with_distractor = 0;
    for pair in pairs.iter().cloned() {
        let distractor = if distractors {
            match select_distractor_story(&encoded, &pair.story_a, aspect, config.matcher.threshold) {
                Ok(d) => {
                    with_distractor += 1;
                    Some(d)
                }
                Err(narrclause::Error::NoCandidates(_)) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        serde_json::to_writer(&mut w, &SelectedPair { pair, distractor })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    config.write_beside(out)?;
    let suffix = if distractors { format!(", {with_distractor} with a distractor") } else { String::new() };
    println!(
        "{} pairs matched only at {} (threshold {}){suffix} -> {}",
        pairs.len(),
        aspect,
        config.matcher.threshold,
        out.display()
    );
    Ok(())
}

fn report(config: &RunConfig, records: &Path, kind: ReportKind, out_dir: Option<&Path>) -> Result<()> {
    let records = load_choice_records(records)?;
    let (table, csv, name) = match kind {
        ReportKind::Detection => {
            let r = detection_report(&records)?;
            (r.to_string(), r.to_csv(), "detection.csv")
        }
        ReportKind::Mentions => {
            let r = aspect_mention_report(&records)?;
            (r.to_string(), r.to_csv(), "mentions.csv")
        }
    };
    println!("{table}");
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path: PathBuf = dir.join(name);
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        config.write_beside(dir)?;
    }
    Ok(())
}
