//! Greedy best-first tagset reduction driven by tagging accuracy.
//!
//! Starting from the identity clustering, every iteration scores each
//! admissible pair of current clusters by the known-word accuracy obtained on
//! the clustering part after merging it, and commits the best one. The loop
//! stops once every candidate lowers accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::ngram::{NgramCounts, TrigramModel};
use crate::tagger::{DecodeOptions, Tagger};
use crate::tagset::{ClusterTagset, Tagset};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// Only commit merges that raise accuracy.
    pub strict_improvement: bool,
    pub max_merges: Option<usize>,
    /// Worker threads for candidate evaluation; `None` uses the global pool.
    pub threads: Option<usize>,
    pub beam: Option<usize>,
}

/// Known-word correctness counts on one corpus part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub correct: u64,
    pub known: u64,
}

impl Score {
    pub fn accuracy(&self) -> f64 {
        if self.known == 0 {
            0.0
        } else {
            self.correct as f64 / self.known as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub merged: (String, String),
    pub result: String,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub correct_before: u64,
    pub correct_after: u64,
    pub tagset_size_after: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTrace {
    pub initial: Score,
    pub steps: Vec<MergeStep>,
    pub clustering: ClusterTagset,
}

#[derive(Serialize, Deserialize)]
struct TraceJson {
    initial_accuracy: f64,
    final_accuracy: f64,
    known_tokens: u64,
    initial_tagset_size: usize,
    final_tagset_size: usize,
    steps: Vec<MergeStep>,
    clusters: Vec<String>,
}

impl ClusterTrace {
    pub fn initial_accuracy(&self) -> f64 {
        self.initial.accuracy()
    }

    pub fn final_accuracy(&self) -> f64 {
        self.steps
            .last()
            .map_or(self.initial.accuracy(), |s| s.accuracy_after)
    }

    /// Applies the recorded merges, in order, to the identity clustering.
    pub fn replay(&self, tagset: &Tagset, lexicon: &Lexicon) -> Result<ClusterTagset> {
        let mut clustering = ClusterTagset::identity(tagset);
        for step in &self.steps {
            let find = |name: &str| {
                clustering
                    .position(name)
                    .ok_or_else(|| Error::Config(format!("trace names unknown cluster {name}")))
            };
            let (a, b) = (find(&step.merged.0)?, find(&step.merged.1)?);
            clustering = clustering.merge(a, b, lexicon)?;
        }
        Ok(clustering)
    }

    pub fn to_json(&self) -> Result<String> {
        let json = TraceJson {
            initial_accuracy: self.initial.accuracy(),
            final_accuracy: self.final_accuracy(),
            known_tokens: self.initial.known,
            initial_tagset_size: self.clustering.num_tags(),
            final_tagset_size: self.clustering.len(),
            steps: self.steps.clone(),
            clusters: self.clustering.names(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    /// Steps recorded in a JSON trace written by [`ClusterTrace::to_json`].
    pub fn steps_from_json(text: &str) -> Result<Vec<MergeStep>> {
        let json: TraceJson = serde_json::from_str(text)?;
        Ok(json.steps)
    }
}

/// Admissible unordered pairs of current clusters, ordered by display names.
/// Each pair is returned as `(a, b)` with `name(a) < name(b)`.
pub fn candidate_pairs(clustering: &ClusterTagset, lexicon: &Lexicon) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..clustering.len()).collect();
    order.sort_by(|&a, &b| {
        clustering
            .cluster(a)
            .name()
            .cmp(clustering.cluster(b).name())
    });
    let mut pairs = Vec::new();
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            let left = clustering.cluster(a).members();
            let right = clustering.cluster(b).members();
            if lexicon.cross_conflict(left, right).is_none() {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Known-word accuracy on `part` when tagging with `train_counts` projected
/// onto `clustering`, measured on restored original tags.
pub fn evaluate_clustering(
    train_counts: &NgramCounts,
    clustering: &ClusterTagset,
    part: &Corpus,
    lexicon: &Lexicon,
    opts: DecodeOptions,
) -> Result<Score> {
    let model = TrigramModel::from_counts(train_counts.project(clustering)?)?;
    let tagger = Tagger::new(&model, clustering, lexicon)?.with_options(opts);
    let mut score = Score {
        correct: 0,
        known: 0,
    };
    for sentence in part.sentences() {
        let out = tagger.tag_sentence(sentence)?;
        for (tok, &pred) in sentence.tokens().iter().zip(&out.tags) {
            if lexicon.is_known(&tok.word) {
                score.known += 1;
                if pred == tok.tag {
                    score.correct += 1;
                }
            }
        }
    }
    Ok(score)
}

/// Accuracy after merging clusters `a` and `b`.
pub fn evaluate_candidate(
    train_counts: &NgramCounts,
    clustering: &ClusterTagset,
    pair: (usize, usize),
    part: &Corpus,
    lexicon: &Lexicon,
    opts: DecodeOptions,
) -> Result<Score> {
    let merged = clustering.merge(pair.0, pair.1, lexicon)?;
    evaluate_clustering(train_counts, &merged, part, lexicon, opts)
}

pub fn greedy_cluster(
    train_counts: &NgramCounts,
    part: &Corpus,
    lexicon: &Lexicon,
    config: &ClusterConfig,
) -> Result<ClusterTrace> {
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| greedy_inner(train_counts, part, lexicon, config))
        }
        None => greedy_inner(train_counts, part, lexicon, config),
    }
}

fn greedy_inner(
    train_counts: &NgramCounts,
    part: &Corpus,
    lexicon: &Lexicon,
    config: &ClusterConfig,
) -> Result<ClusterTrace> {
    if part.is_empty() {
        return Err(Error::EmptyClusteringPart);
    }
    let opts = DecodeOptions { beam: config.beam };
    let mut clustering = ClusterTagset::identity(lexicon.tagset());
    let initial = evaluate_clustering(train_counts, &clustering, part, lexicon, opts)?;
    if initial.known == 0 {
        return Err(Error::NoKnownTokens);
    }
    let mut current = initial;
    let mut steps = Vec::new();

    loop {
        if config.max_merges.is_some_and(|cap| steps.len() >= cap) {
            break;
        }
        let pairs = candidate_pairs(&clustering, lexicon);
        if pairs.is_empty() {
            break;
        }
        let scores: Vec<Score> = pairs
            .par_iter()
            .map(|&pair| evaluate_candidate(train_counts, &clustering, pair, part, lexicon, opts))
            .collect::<Result<_>>()?;
        // first maximum in name order
        let (best_idx, best) = scores
            .iter()
            .enumerate()
            .fold(None::<(usize, Score)>, |acc, (i, &s)| match acc {
                Some((_, b)) if b.correct >= s.correct => acc,
                _ => Some((i, s)),
            })
            .expect("non-empty candidate list");
        let accept = if config.strict_improvement {
            best.correct > current.correct
        } else {
            best.correct >= current.correct
        };
        if !accept {
            break;
        }
        let (a, b) = pairs[best_idx];
        let names = (
            clustering.cluster(a).name().to_owned(),
            clustering.cluster(b).name().to_owned(),
        );
        clustering = clustering.merge(a, b, lexicon)?;
        let result = clustering.cluster(a.min(b)).name().to_owned();
        steps.push(MergeStep {
            merged: names,
            result,
            accuracy_before: current.accuracy(),
            accuracy_after: best.accuracy(),
            correct_before: current.correct,
            correct_after: best.correct,
            tagset_size_after: clustering.len(),
        });
        current = best;
    }

    Ok(ClusterTrace {
        initial,
        steps,
        clustering,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Casing;
    use crate::tagset::cluster_admissible;

    fn lexicon(text: &str) -> Lexicon {
        Lexicon::build(&Corpus::parse(text).unwrap(), Casing::Preserve)
    }

    #[test]
    fn three_disjoint_singletons_give_three_pairs() {
        let lex = lexicon("a\tA\nb\tB\nc\tC\n");
        let pairs = candidate_pairs(&ClusterTagset::identity(lex.tagset()), &lex);
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn shared_word_excludes_pair() {
        let lex = lexicon("cliff\tNN\ncliff\tNP\nthe\tAT\n");
        let c = ClusterTagset::identity(lex.tagset());
        let pairs = candidate_pairs(&c, &lex);
        let names: Vec<(String, String)> = pairs
            .iter()
            .map(|&(a, b)| (c.cluster(a).name().into(), c.cluster(b).name().into()))
            .collect();
        assert_eq!(
            names,
            vec![("AT".into(), "NN".into()), ("AT".into(), "NP".into())]
        );
        for (a, b) in pairs {
            let members = [c.cluster(a).members(), c.cluster(b).members()].concat();
            assert!(cluster_admissible(&members, &lex));
        }
    }

    #[test]
    fn fully_constrained_lexicon_has_no_steps() {
        let text = "w\tA\nw\tB\nw\tC\n\nx\tA\ny\tB\n";
        let c = Corpus::parse(text).unwrap();
        let lex = Lexicon::build(&c, Casing::Preserve);
        let counts = NgramCounts::count(&c, None, Casing::Preserve).unwrap();
        let trace = greedy_cluster(&counts, &c, &lex, &ClusterConfig::default()).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.clustering, ClusterTagset::identity(c.tagset()));
    }

    #[test]
    fn empty_clustering_part_is_an_error() {
        let c = Corpus::parse("a\tA\n").unwrap();
        let lex = Lexicon::build(&c, Casing::Preserve);
        let counts = NgramCounts::count(&c, None, Casing::Preserve).unwrap();
        let empty = Corpus::empty(c.tagset().clone());
        assert!(matches!(
            greedy_cluster(&counts, &empty, &lex, &ClusterConfig::default()),
            Err(Error::EmptyClusteringPart)
        ));
    }

    #[test]
    fn identity_evaluation_equals_baseline() {
        let text = "a\tX\nb\tY\n\nb\tX\na\tY\n\nc\tZ\n";
        let c = Corpus::parse(text).unwrap();
        let lex = Lexicon::build(&c, Casing::Preserve);
        let counts = NgramCounts::count(&c, None, Casing::Preserve).unwrap();
        let id = ClusterTagset::identity(c.tagset());
        let s = evaluate_clustering(&counts, &id, &c, &lex, DecodeOptions::default()).unwrap();
        assert_eq!(s.known, 5);
        assert!((0.0..=1.0).contains(&s.accuracy()));
    }

    #[test]
    fn max_merges_caps_the_trace() {
        let text = "a\tA\nb\tB\nc\tC\nd\tD\n\n".repeat(3);
        let c = Corpus::parse(&text).unwrap();
        let lex = Lexicon::build(&c, Casing::Preserve);
        let counts = NgramCounts::count(&c, None, Casing::Preserve).unwrap();
        let config = ClusterConfig {
            max_merges: Some(1),
            ..Default::default()
        };
        let trace = greedy_cluster(&counts, &c, &lex, &config).unwrap();
        assert_eq!(trace.steps.len(), 1);
        // unambiguous words: every merge ties, so the first pair by name wins
        assert_eq!(trace.steps[0].merged, ("A".into(), "B".into()));
        assert_eq!(trace.steps[0].result, "{A,B}");

        let uncapped = greedy_cluster(&counts, &c, &lex, &ClusterConfig::default()).unwrap();
        assert_eq!(uncapped.clustering.len(), 1);
        let strict = ClusterConfig {
            strict_improvement: true,
            ..Default::default()
        };
        assert!(greedy_cluster(&counts, &c, &lex, &strict)
            .unwrap()
            .steps
            .is_empty());
    }

    #[test]
    fn trace_json_and_replay() {
        let text = "a\tA\nb\tB\nc\tC\n\n".repeat(2);
        let c = Corpus::parse(&text).unwrap();
        let lex = Lexicon::build(&c, Casing::Preserve);
        let counts = NgramCounts::count(&c, None, Casing::Preserve).unwrap();
        let trace = greedy_cluster(&counts, &c, &lex, &ClusterConfig::default()).unwrap();
        assert_eq!(trace.replay(c.tagset(), &lex).unwrap(), trace.clustering);
        let json = trace.to_json().unwrap();
        assert_eq!(ClusterTrace::steps_from_json(&json).unwrap(), trace.steps);
        assert!(json.contains("\"final_tagset_size\": 1"));
    }
}
