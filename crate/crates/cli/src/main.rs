use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tagreduce::corpus::{parse_words, split_corpus, Corpus, SplitMode, SplitSpec};
use tagreduce::eval::{accuracy, run_experiment, ExperimentConfig};
use tagreduce::lexicon::{Casing, Lexicon};
use tagreduce::ngram::{NgramCounts, TrigramModel};
use tagreduce::synthetic::{generate, SyntheticConfig};
use tagreduce::tagger::{DecodeOptions, TagSequence, Tagger};
use tagreduce::tagset::{ClusterTagset, Tagset};
use tagreduce::{greedy_cluster, ClusterConfig};

/// Trigram HMM tagging with lossless tagset reduction.
#[derive(Parser)]
#[command(name = "tagreduce", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count n-grams over original tags and write a model file.
    Train {
        /// Tagged corpus.
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        lowercase: bool,
    },
    /// Reduce the tagset by greedy admissible merging.
    Cluster {
        /// Tagged training part; may be repeated.
        #[arg(long = "train", required = true)]
        training: Vec<PathBuf>,
        /// Tagged part used to score candidate merges.
        #[arg(long = "clustering")]
        clustering: PathBuf,
        /// Cluster map output.
        #[arg(long)]
        map: PathBuf,
        /// JSON merge trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        lowercase: bool,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Tag untagged text (one word per line, blank line between sentences).
    Tag {
        #[command(flatten)]
        model: ModelArgs,
        /// Input text; standard input when omitted.
        input: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also print the cluster chosen for each token.
        #[arg(long)]
        show_clusters: bool,
        /// Mark unknown words whose tag is a guess with `#guess`.
        #[arg(short, long)]
        verbose: bool,
    },
    /// Tag a gold corpus and report accuracy as JSON.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        /// Gold tagged corpus.
        gold: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run baseline and clustered pipelines from a TOML config.
    Experiment {
        config: PathBuf,
        /// Overrides the split fractions, e.g. 0.8,0.1,0.1.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        split_mode: Option<SplitMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lowercase: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the three parts of a corpus split to a directory as A.txt, B.txt, C.txt.
    Split {
        corpus: PathBuf,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        split: String,
        #[arg(long, default_value = "contiguous")]
        split_mode: SplitMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a synthetic corpus with planted redundant tag pairs.
    GenSynthetic {
        #[arg(long, default_value_t = 20)]
        tags: usize,
        #[arg(long, default_value_t = 3)]
        pairs: usize,
        #[arg(long, default_value_t = 2000)]
        vocab: usize,
        #[arg(long, default_value_t = 5000)]
        sentences: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        ambiguity: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SearchArgs {
    /// Only accept merges that strictly raise accuracy.
    #[arg(long)]
    strict_improvement: bool,
    #[arg(long)]
    max_merges: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Decode with a beam of this many states per position.
    #[arg(long)]
    beam: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(short, long)]
    model: PathBuf,
    /// Cluster map; the identity tagset when omitted.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Tagged corpora defining the known words; may be repeated.
    #[arg(long = "lexicon", required = true)]
    lexicon: Vec<PathBuf>,
    #[arg(long)]
    beam: Option<usize>,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            corpus,
            out,
            lowercase,
        } => train(&corpus, &out, lowercase),
        Command::Cluster {
            training,
            clustering,
            map,
            trace,
            lowercase,
            search,
        } => cluster(
            &training,
            &clustering,
            &map,
            trace.as_deref(),
            lowercase,
            search,
        ),
        Command::Tag {
            model,
            input,
            out,
            show_clusters,
            verbose,
        } => tag(
            &model,
            input.as_deref(),
            out.as_deref(),
            show_clusters,
            verbose,
        ),
        Command::Eval { model, gold, out } => eval(&model, &gold, out.as_deref()),
        Command::Experiment {
            config,
            split,
            split_mode,
            seed,
            lowercase,
            out,
            threads,
        } => {
            let text = read(&config)?;
            let mut cfg = ExperimentConfig::from_toml(&text, config.parent())
                .with_context(|| format!("{}", config.display()))?;
            if let Some(split) = split {
                cfg.split = SplitSpec::parse_fractions(&split)?;
            }
            if let Some(mode) = split_mode {
                cfg.split_mode = mode;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if threads.is_some() {
                cfg.clustering.threads = threads;
            }
            cfg.lowercase |= lowercase;
            cfg.validate()?;
            let mut sink = output(out.as_deref())?;
            let results = run_experiment(&cfg)?;
            let reports: Vec<_> = results.into_iter().map(|(report, _)| report).collect();
            writeln!(sink, "{}", serde_json::to_string_pretty(&reports)?)?;
            Ok(sink.flush()?)
        }
        Command::Split {
            corpus,
            split,
            split_mode,
            seed,
            out_dir,
        } => {
            let spec = SplitSpec::parse_fractions(&split)?;
            let corpus = load_corpus(&corpus)?;
            fs::create_dir_all(&out_dir)?;
            let parts = split_corpus(&corpus, &spec, split_mode, seed)?;
            for (name, part) in [
                ("A", &parts.training),
                ("B", &parts.clustering),
                ("C", &parts.testing),
            ] {
                fs::write(out_dir.join(format!("{name}.txt")), part.to_text())?;
            }
            Ok(())
        }
        Command::GenSynthetic {
            tags,
            pairs,
            vocab,
            sentences,
            seed,
            ambiguity,
            out,
        } => {
            let config = SyntheticConfig {
                tags,
                planted_pairs: pairs,
                vocabulary: vocab,
                sentences,
                seed,
                ambiguity,
                ..Default::default()
            };
            let mut sink = output(out.as_deref())?;
            let synthetic = generate(&config)?;
            sink.write_all(synthetic.corpus.to_text().as_bytes())?;
            sink.flush()?;
            for (a, b) in &synthetic.planted {
                eprintln!("planted\t{a}\t{b}");
            }
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::parse(&read(path)?).with_context(|| format!("{}", path.display()))
}

/// Parses several corpora over one shared tagset, seeded with `seed`.
fn load_shared(paths: &[PathBuf], seed: Tagset) -> Result<Vec<Corpus>> {
    let texts = paths.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    // parse individually first so errors name the offending file
    for (text, path) in refs.iter().zip(paths) {
        Corpus::parse(text).with_context(|| format!("{}", path.display()))?;
    }
    Ok(Corpus::parse_many_with(&refs, seed)?)
}

/// Opens the output up front so a bad path fails before any long computation.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn train(corpus: &Path, out: &Path, lowercase: bool) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let mut sink = output(Some(out))?;
    let model = TrigramModel::train(&corpus, None, Casing::from_lowercase_flag(lowercase))?;
    sink.write_all(model.dump().as_bytes())?;
    Ok(sink.flush()?)
}

fn cluster(
    training: &[PathBuf],
    clustering: &Path,
    map: &Path,
    trace_path: Option<&Path>,
    lowercase: bool,
    search: SearchArgs,
) -> Result<()> {
    let mut paths = training.to_vec();
    paths.push(clustering.to_path_buf());
    let parts = load_shared(&paths, Tagset::new())?;
    let (part, train_parts) = parts.split_last().expect("at least two inputs");
    let mut map_sink = output(Some(map))?;
    let mut trace_sink = trace_path.map(|p| output(Some(p))).transpose()?;

    let casing = Casing::from_lowercase_flag(lowercase);
    let train_refs: Vec<&Corpus> = train_parts.iter().collect();
    let training = Corpus::concat(&train_refs)?;
    let lexicon = Lexicon::build(&Corpus::concat(&[&training, part])?, casing);
    let counts = NgramCounts::count(&training, None, casing)?;
    let config = ClusterConfig {
        strict_improvement: search.strict_improvement,
        max_merges: search.max_merges,
        threads: search.threads,
        beam: search.beam,
    };
    let trace = greedy_cluster(&counts, part, &lexicon, &config)?;

    map_sink.write_all(trace.clustering.to_map_string().as_bytes())?;
    map_sink.flush()?;
    if let Some(sink) = trace_sink.as_mut() {
        writeln!(sink, "{}", trace.to_json()?)?;
        sink.flush()?;
    }
    eprintln!(
        "tagset {} -> {} after {} merges; clustering-part accuracy {:.4} -> {:.4}",
        trace.clustering.num_tags(),
        trace.clustering.len(),
        trace.steps.len(),
        trace.initial_accuracy(),
        trace.final_accuracy()
    );
    Ok(())
}

/// Model, clustering and lexicon ready for decoding.
struct Loaded {
    model: TrigramModel,
    clustering: ClusterTagset,
    lexicon: Lexicon,
    beam: Option<usize>,
}

impl Loaded {
    fn tagger(&self) -> Result<Tagger<'_>> {
        Ok(Tagger::new(&self.model, &self.clustering, &self.lexicon)?
            .with_options(DecodeOptions { beam: self.beam }))
    }
}

/// Loads the model over original tags and projects it onto the cluster map.
/// `extra` corpora (e.g. gold data) join the shared tagset but not the lexicon.
fn load(args: &ModelArgs, extra: &[PathBuf]) -> Result<(Loaded, Vec<Corpus>)> {
    let dump = read(&args.model)?;
    let trained =
        TrigramModel::parse_dump(&dump).with_context(|| format!("{}", args.model.display()))?;
    let mut paths = args.lexicon.clone();
    paths.extend_from_slice(extra);
    let mut parts = load_shared(&paths, Tagset::from_names(trained.counts().labels()))?;
    let extra_parts = parts.split_off(args.lexicon.len());
    let sources: Vec<&Corpus> = parts.iter().collect();
    let known = Corpus::concat(&sources)?;
    let tagset = known.tagset().clone();
    let lexicon = Lexicon::build(&known, trained.counts().casing());

    let clustering = match &args.map {
        Some(path) => {
            let c = ClusterTagset::parse_map(&read(path)?, &tagset)
                .with_context(|| format!("{}", path.display()))?;
            c.validate_admissible(&lexicon)
                .with_context(|| format!("{} is not admissible", path.display()))?;
            c
        }
        None => ClusterTagset::identity(&tagset),
    };
    let mut counts = trained.counts().clone();
    counts.extend_labels(tagset.names())?;
    let model = TrigramModel::from_counts(counts.project(&clustering)?)?;
    Ok((
        Loaded {
            model,
            clustering,
            lexicon,
            beam: args.beam,
        },
        extra_parts,
    ))
}

fn tag(
    args: &ModelArgs,
    input: Option<&Path>,
    out: Option<&Path>,
    show_clusters: bool,
    verbose: bool,
) -> Result<()> {
    let text = match input {
        Some(p) => read(p)?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let sentences = parse_words(&text)?;
    let mut sink = output(out)?;
    let (loaded, _) = load(args, &[])?;
    let tagged = loaded.tagger()?.tag_all(&sentences)?;
    let tagset = loaded.lexicon.tagset();
    for (words, seq) in sentences.iter().zip(&tagged) {
        write_sentence(
            &mut sink,
            words,
            seq,
            tagset,
            &loaded.clustering,
            show_clusters,
            verbose,
        )?;
    }
    Ok(sink.flush()?)
}

fn write_sentence(
    sink: &mut dyn Write,
    words: &[String],
    seq: &TagSequence,
    tagset: &Tagset,
    clustering: &ClusterTagset,
    show_clusters: bool,
    verbose: bool,
) -> Result<()> {
    for (i, word) in words.iter().enumerate() {
        write!(sink, "{word}\t{}", tagset.name(seq.tags[i]))?;
        if show_clusters {
            write!(sink, "\t{}", clustering.cluster(seq.clusters[i]).name())?;
        }
        if verbose && seq.guessed[i] {
            write!(sink, "\t#guess")?;
        }
        writeln!(sink)?;
    }
    writeln!(sink)?;
    Ok(())
}

fn eval(args: &ModelArgs, gold: &Path, out: Option<&Path>) -> Result<()> {
    let mut sink = output(out)?;
    let (loaded, extra) = load(args, &[gold.to_path_buf()])?;
    let gold = &extra[0];
    let predicted = loaded.tagger()?.tag_corpus(gold)?;
    let report = accuracy(gold, &predicted, &loaded.lexicon)?;
    if report.fallback_sentences > 0 {
        eprintln!(
            "{} sentences decoded by the per-token fallback",
            report.fallback_sentences
        );
    }
    writeln!(sink, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(sink.flush()?)
}
