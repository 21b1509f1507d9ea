//! Known-word accuracy and the baseline / clustered experiment harness.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::clustering::{greedy_cluster, ClusterConfig, ClusterTrace};
use crate::corpus::{split_corpus, Corpus, CorpusSplit, SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::lexicon::{Casing, Lexicon};
use crate::ngram::{NgramCounts, TrigramModel};
use crate::tagger::{DecodeOptions, TagSequence, Tagger};
use crate::tagset::ClusterTagset;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub gold: String,
    pub predicted: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total_tokens: u64,
    pub known_tokens: u64,
    pub unknown_tokens: u64,
    pub known_correct: u64,
    /// Headline metric: accuracy over tokens known to the lexicon.
    pub known_accuracy: f64,
    pub unknown_rate: f64,
    /// Accuracy over all tokens. Not comparable with the known-word figure.
    pub all_tokens_correct: u64,
    pub all_tokens_accuracy: f64,
    /// Known-token confusion counts over original tags, sorted by (gold, predicted).
    pub confusion: Vec<ConfusionEntry>,
    pub fallback_sentences: u64,
}

/// Scores `predicted` against the gold tags of `gold`.
pub fn accuracy(gold: &Corpus, predicted: &[TagSequence], lexicon: &Lexicon) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gold sentences, {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    let tagset = gold.tagset();
    let mut report = EvalReport {
        total_tokens: 0,
        known_tokens: 0,
        unknown_tokens: 0,
        known_correct: 0,
        known_accuracy: 0.0,
        unknown_rate: 0.0,
        all_tokens_correct: 0,
        all_tokens_accuracy: 0.0,
        confusion: Vec::new(),
        fallback_sentences: 0,
    };
    let mut confusion: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (i, (sentence, pred)) in gold.sentences().iter().zip(predicted).enumerate() {
        if sentence.len() != pred.len() {
            return Err(Error::LengthMismatch(format!(
                "sentence {i}: {} gold tokens, {} predicted",
                sentence.len(),
                pred.len()
            )));
        }
        if pred.fallback {
            report.fallback_sentences += 1;
        }
        for (tok, &tag) in sentence.tokens().iter().zip(&pred.tags) {
            report.total_tokens += 1;
            let correct = tok.tag == tag;
            report.all_tokens_correct += correct as u64;
            if lexicon.is_known(&tok.word) {
                report.known_tokens += 1;
                report.known_correct += correct as u64;
                *confusion
                    .entry((tagset.name(tok.tag), tagset.name(tag)))
                    .or_insert(0) += 1;
            } else {
                report.unknown_tokens += 1;
            }
        }
    }
    if report.known_tokens == 0 {
        return Err(Error::NoKnownTokens);
    }
    report.known_accuracy = report.known_correct as f64 / report.known_tokens as f64;
    report.unknown_rate = report.unknown_tokens as f64 / report.total_tokens as f64;
    report.all_tokens_accuracy = report.all_tokens_correct as f64 / report.total_tokens as f64;
    report.confusion = confusion
        .into_iter()
        .map(|((g, p), count)| ConfusionEntry {
            gold: g.to_owned(),
            predicted: p.to_owned(),
            count,
        })
        .collect();
    Ok(report)
}

/// McNemar's test on known-token correctness of two runs over the same gold part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// Tokens only the first run got right.
    pub only_first: u64,
    /// Tokens only the second run got right.
    pub only_second: u64,
    /// Continuity-corrected chi-square statistic, one degree of freedom.
    pub statistic: f64,
    pub p_value: f64,
}

pub fn mcnemar(
    gold: &Corpus,
    first: &[TagSequence],
    second: &[TagSequence],
    lexicon: &Lexicon,
) -> Result<McNemar> {
    if first.len() != gold.len() || second.len() != gold.len() {
        return Err(Error::LengthMismatch(
            "runs cover different sentence counts".into(),
        ));
    }
    let (mut b, mut c) = (0u64, 0u64);
    for ((sentence, x), y) in gold.sentences().iter().zip(first).zip(second) {
        if x.len() != sentence.len() || y.len() != sentence.len() {
            return Err(Error::LengthMismatch(
                "runs disagree on sentence length".into(),
            ));
        }
        for ((tok, &tx), &ty) in sentence.tokens().iter().zip(&x.tags).zip(&y.tags) {
            if !lexicon.is_known(&tok.word) {
                continue;
            }
            match (tx == tok.tag, ty == tok.tag) {
                (true, false) => b += 1,
                (false, true) => c += 1,
                _ => {}
            }
        }
    }
    let (statistic, p_value) = if b + c == 0 {
        (0.0, 1.0)
    } else {
        let diff = (b as f64 - c as f64).abs() - 1.0;
        let stat = diff.max(0.0).powi(2) / (b + c) as f64;
        let chi = ChiSquared::new(1.0).expect("valid degrees of freedom");
        (stat, 1.0 - chi.cdf(stat))
    };
    Ok(McNemar {
        only_first: b,
        only_second: c,
        statistic,
        p_value,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The clustering part joins the training data; no reduction.
    #[default]
    Baseline,
    /// Train on the training part, reduce the tagset on the clustering part.
    Clustered,
}

/// Everything a single run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub mode: Mode,
    pub report: EvalReport,
    pub trace: Option<ClusterTrace>,
    pub original_tagset_size: usize,
    pub reduced_tagset_size: usize,
    pub predictions: Vec<TagSequence>,
    /// Order-sensitive hash of the test sentences.
    pub test_fingerprint: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub mode: Mode,
    pub training: Vec<String>,
    pub clustering: Vec<String>,
    pub testing: String,
    pub original_tagset_size: usize,
    pub reduced_tagset_size: usize,
    pub tagset_reduction: usize,
    pub clustering_initial_accuracy: Option<f64>,
    pub clustering_final_accuracy: Option<f64>,
    pub merges: Option<usize>,
    pub test_fingerprint: String,
    pub report: EvalReport,
}

pub fn corpus_fingerprint(corpus: &Corpus) -> u64 {
    let mut h = FxHasher::default();
    corpus.len().hash(&mut h);
    for s in corpus.sentences() {
        for t in s.tokens() {
            t.word.hash(&mut h);
            corpus.tagset().name(t.tag).hash(&mut h);
        }
        0xffu8.hash(&mut h);
    }
    h.finish()
}

/// Runs one experiment on already separated parts sharing one tagset.
///
/// Both modes use a lexicon built from training ∪ clustering. Baseline mode
/// also trains the model on that union; clustered mode trains on the
/// training part only and reduces the tagset on the clustering part.
pub fn run_on_parts(
    training: &Corpus,
    clustering: &Corpus,
    testing: &Corpus,
    mode: Mode,
    casing: Casing,
    config: &ClusterConfig,
) -> Result<RunOutcome> {
    let known_source = if clustering.is_empty() {
        training.clone()
    } else {
        Corpus::concat(&[training, clustering])?
    };
    if testing.tagset() != known_source.tagset() {
        return Err(Error::Config("test part uses a different tagset".into()));
    }
    let lexicon = Lexicon::build(&known_source, casing);
    let tagset = known_source.tagset().clone();
    let opts = DecodeOptions { beam: config.beam };

    let (counts, reduced, trace) = match mode {
        Mode::Baseline => {
            let counts = NgramCounts::count(&known_source, None, casing)?;
            (counts, ClusterTagset::identity(&tagset), None)
        }
        Mode::Clustered => {
            let counts = NgramCounts::count(training, None, casing)?;
            let trace = greedy_cluster(&counts, clustering, &lexicon, config)?;
            let reduced = trace.clustering.clone();
            (counts, reduced, Some(trace))
        }
    };
    let model = TrigramModel::from_counts(counts.project(&reduced)?)?;
    let tagger = Tagger::new(&model, &reduced, &lexicon)?.with_options(opts);
    let predictions = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| tagger.tag_corpus(testing))?,
        None => tagger.tag_corpus(testing)?,
    };
    let report = accuracy(testing, &predictions, &lexicon)?;
    Ok(RunOutcome {
        mode,
        report,
        trace,
        original_tagset_size: tagset.len(),
        reduced_tagset_size: reduced.len(),
        predictions,
        test_fingerprint: corpus_fingerprint(testing),
    })
}

/// Roles of named parts in one run. Parts are `A`, `B`, `C` in split order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub name: String,
    pub mode: Mode,
    pub training: Vec<String>,
    #[serde(default)]
    pub clustering: Vec<String>,
    pub testing: String,
}

/// A set of runs over one corpus split, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub split: SplitSpec,
    #[serde(default)]
    pub split_mode: SplitMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lowercase: bool,
    #[serde(default)]
    pub clustering: ClusterConfig,
    /// Defaults to the four-row baseline/clustered protocol when empty.
    #[serde(default, rename = "run")]
    pub runs: Vec<RunSpec>,
}

impl ExperimentConfig {
    /// Parses the TOML config; a relative corpus path is resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut config: ExperimentConfig = toml::from_str(text)?;
        if let Some(dir) = base_dir {
            if config.corpus.is_relative() {
                config.corpus = dir.join(&config.corpus);
            }
        }
        if config.runs.is_empty() {
            config.runs = default_runs();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let SplitSpec::Fractions(f) = &self.split {
            if f.iter().any(|x| !x.is_finite() || *x < 0.0) || f.iter().sum::<f64>() > 1.0 + 1e-9 {
                return Err(Error::Config(format!("invalid split fractions {f:?}")));
            }
        }
        for run in &self.runs {
            let mut roles: Vec<&String> = run.training.iter().chain(&run.clustering).collect();
            roles.push(&run.testing);
            for part in &roles {
                if !["A", "B", "C"].contains(&part.as_str()) {
                    return Err(Error::Config(format!(
                        "run {}: unknown part {part}",
                        run.name
                    )));
                }
            }
            let mut sorted = roles.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != roles.len() {
                return Err(Error::Config(format!(
                    "run {}: a part has two roles",
                    run.name
                )));
            }
            if run.training.is_empty() {
                return Err(Error::Config(format!("run {}: no training part", run.name)));
            }
            if run.mode == Mode::Clustered && run.clustering.is_empty() {
                return Err(Error::Config(format!(
                    "run {}: clustered mode needs a clustering part",
                    run.name
                )));
            }
        }
        Ok(())
    }
}

/// Two baselines and two clustered runs, permuting the roles of parts B and C.
pub fn default_runs() -> Vec<RunSpec> {
    let run = |name: &str, mode, cluster: &str, test: &str| RunSpec {
        name: name.into(),
        mode,
        training: vec!["A".into()],
        clustering: vec![cluster.into()],
        testing: test.into(),
    };
    vec![
        run("1", Mode::Baseline, "B", "C"),
        run("2", Mode::Baseline, "C", "B"),
        run("3", Mode::Clustered, "B", "C"),
        run("4", Mode::Clustered, "C", "B"),
    ]
}

fn part<'a>(split: &'a CorpusSplit, name: &str) -> &'a Corpus {
    match name {
        "A" => &split.training,
        "B" => &split.clustering,
        _ => &split.testing,
    }
}

fn union(split: &CorpusSplit, names: &[String]) -> Result<Corpus> {
    let parts: Vec<&Corpus> = names.iter().map(|n| part(split, n)).collect();
    if parts.is_empty() {
        return Ok(Corpus::empty(split.training.tagset().clone()));
    }
    Corpus::concat(&parts)
}

pub fn run_plan(
    corpus: &Corpus,
    config: &ExperimentConfig,
) -> Result<Vec<(RunReport, RunOutcome)>> {
    config.validate()?;
    let split = split_corpus(corpus, &config.split, config.split_mode, config.seed)?;
    let casing = Casing::from_lowercase_flag(config.lowercase);
    let mut out = Vec::new();
    for run in &config.runs {
        let training = union(&split, &run.training)?;
        let clustering = union(&split, &run.clustering)?;
        let testing = part(&split, &run.testing);
        let outcome = run_on_parts(
            &training,
            &clustering,
            testing,
            run.mode,
            casing,
            &config.clustering,
        )?;
        let report = RunReport {
            name: run.name.clone(),
            mode: run.mode,
            training: run.training.clone(),
            clustering: run.clustering.clone(),
            testing: run.testing.clone(),
            original_tagset_size: outcome.original_tagset_size,
            reduced_tagset_size: outcome.reduced_tagset_size,
            tagset_reduction: outcome.original_tagset_size - outcome.reduced_tagset_size,
            clustering_initial_accuracy: outcome.trace.as_ref().map(ClusterTrace::initial_accuracy),
            clustering_final_accuracy: outcome.trace.as_ref().map(ClusterTrace::final_accuracy),
            merges: outcome.trace.as_ref().map(|t| t.steps.len()),
            test_fingerprint: format!("{:016x}", outcome.test_fingerprint),
            report: outcome.report.clone(),
        };
        out.push((report, outcome));
    }
    // runs testing on the same part must have seen identical sentences
    for (i, (a, _)) in out.iter().enumerate() {
        for (b, _) in &out[i + 1..] {
            if a.testing == b.testing && a.test_fingerprint != b.test_fingerprint {
                return Err(Error::Config("test parts differ between runs".into()));
            }
        }
    }
    Ok(out)
}

/// Loads the corpus named in `config` and runs every configured run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<(RunReport, RunOutcome)>> {
    let text = std::fs::read_to_string(&config.corpus)?;
    let corpus = Corpus::parse(&text)?;
    run_plan(&corpus, config)
}
