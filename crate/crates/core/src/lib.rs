//! Trigram HMM part-of-speech tagging with lossless tagset reduction.
//!
//! Tags whose words never overlap can be merged into clusters; the reduced
//! tagset is used for decoding and the original tag of every known word is
//! recovered from its cluster. [`clustering::greedy_cluster`] picks merges by
//! the tagging accuracy they yield on a held-out clustering part.

pub mod clustering;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod ngram;
pub mod synthetic;
pub mod tagger;
pub mod tagset;

pub use clustering::{candidate_pairs, greedy_cluster, ClusterConfig, ClusterTrace, MergeStep};
pub use corpus::{split_corpus, Corpus, CorpusSplit, Sentence, SplitMode, SplitSpec, TaggedToken};
pub use error::{Error, Result};
pub use eval::{accuracy, run_experiment, run_on_parts, EvalReport, ExperimentConfig, Mode};
pub use lexicon::{Casing, Lexicon};
pub use ngram::{estimate_lambdas, Label, Lambdas, NgramCounts, TrigramModel};
pub use tagger::{viterbi_tag, Candidates, DecodeOptions, TagSequence, Tagger};
pub use tagset::{cluster_admissible, restore_original, Cluster, ClusterTagset, TagId, Tagset};
