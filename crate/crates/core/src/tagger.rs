//! Second-order Viterbi decoding and restoration of original tags.
//!
//! The dynamic-program state is the pair (previous label, current label).
//! Among equally probable paths the decoder returns the one whose sequence of
//! label names is lexicographically smallest. To do that without storing
//! whole paths, every state at position `i` carries the rank of its best
//! prefix among all states at `i`; a prefix ordering at `i` follows from the
//! predecessor's rank at `i - 1` and the name of the current label.

use rayon::prelude::*;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::ngram::{Label, TrigramModel};
use crate::tagset::{restore_original, ClusterTagset, TagId};

/// Candidate labels for one token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Candidates {
    /// Known word restricted to these labels.
    Known(Vec<Label>),
    /// Unknown word: every label, uniform emission.
    Unknown,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Keep at most this many states per position. `None` decodes exactly.
    pub beam: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub labels: Vec<Label>,
    /// Natural-log joint probability of the returned path, including the
    /// final transition into EOS. `-inf` when the fallback was used.
    pub log_prob: f64,
    /// Every complete path had probability zero and labels were picked per token.
    pub fallback: bool,
}

/// Emission log-probability used by the decoder.
///
/// Words the model has seen use `p(w|t)`. Words outside the model (unknown,
/// or known only to the lexicon) get the uniform `1/|labels|` over their candidates.
pub fn emission_log_prob(model: &TrigramModel, word: &str, label: Label) -> f64 {
    if model.knows_word(word) {
        model.ln_lexical_prob(word, label)
    } else {
        -(model.num_labels() as f64).ln()
    }
}

struct Column {
    labels: Vec<Label>,
    emit: Vec<f64>,
}

/// Decodes one sentence given per-token candidate sets.
pub fn decode(
    words: &[&str],
    candidates: &[Candidates],
    model: &TrigramModel,
    opts: DecodeOptions,
) -> Result<Decoded> {
    if words.is_empty() {
        return Err(Error::EmptySentence);
    }
    if words.len() != candidates.len() {
        return Err(Error::LengthMismatch(format!(
            "{} words, {} candidate sets",
            words.len(),
            candidates.len()
        )));
    }
    let n_labels = model.num_labels();
    if n_labels == 0 {
        return Err(Error::EmptyCounts);
    }

    // global name order of labels, used for tie-breaking
    let mut by_name: Vec<u32> = (0..n_labels as u32).collect();
    by_name.sort_by(|&a, &b| model.label_name(Label(a)).cmp(model.label_name(Label(b))));
    let mut name_rank = vec![0u32; n_labels];
    for (rank, &l) in by_name.iter().enumerate() {
        name_rank[l as usize] = rank as u32;
    }

    let columns: Vec<Column> = words
        .iter()
        .zip(candidates)
        .map(|(&w, cands)| {
            let mut labels = match cands {
                Candidates::Known(ls) if !ls.is_empty() => ls.clone(),
                _ => model.labels().collect(),
            };
            labels.sort_by_key(|l| name_rank[l.index()]);
            labels.dedup();
            let emit = labels
                .iter()
                .map(|&l| emission_log_prob(model, w, l))
                .collect();
            Column { labels, emit }
        })
        .collect();

    // state k at position i encodes (prev = k / cur_len, cur = k % cur_len);
    // position 0 has the single predecessor BOS.
    let mut prev_len = 1usize;
    let first = &columns[0];
    let mut score: Vec<f64> = first
        .labels
        .iter()
        .zip(&first.emit)
        .map(|(&b, &e)| (0.0 + model.ln_contextual_prob(Label::BOS, Label::BOS, b)) + e)
        .collect();
    let mut alive = vec![true; score.len()];
    // labels are already in name order, so index order is prefix order
    let mut rank: Vec<u32> = (0..score.len() as u32).collect();
    apply_beam(&mut alive, &score, &rank, opts.beam);
    let mut backptr: Vec<Vec<u32>> = vec![vec![0; score.len()]];

    for i in 1..columns.len() {
        let prev_labels: &[Label] = if i >= 2 {
            &columns[i - 2].labels
        } else {
            &[Label::BOS]
        };
        let mid = &columns[i - 1];
        let cur = &columns[i];
        debug_assert_eq!(prev_labels.len(), prev_len);
        let (n_mid, n_cur) = (mid.labels.len(), cur.labels.len());
        let mut next_score = vec![f64::NEG_INFINITY; n_mid * n_cur];
        let mut next_alive = vec![false; n_mid * n_cur];
        let mut back = vec![0u32; n_mid * n_cur];
        let mut pred_rank = vec![u32::MAX; n_mid * n_cur];

        for (a_idx, &a) in mid.labels.iter().enumerate() {
            for (b_idx, &b) in cur.labels.iter().enumerate() {
                let mut best: Option<(f64, u32, u32)> = None;
                for (p_idx, &p) in prev_labels.iter().enumerate() {
                    let k = p_idx * n_mid + a_idx;
                    if !alive[k] {
                        continue;
                    }
                    let s = (score[k] + model.ln_contextual_prob(p, a, b)) + cur.emit[b_idx];
                    let better = match best {
                        None => true,
                        Some((bs, br, _)) => s > bs || (s == bs && rank[k] < br),
                    };
                    if better {
                        best = Some((s, rank[k], k as u32));
                    }
                }
                if let Some((s, r, k)) = best {
                    let idx = a_idx * n_cur + b_idx;
                    next_score[idx] = s;
                    next_alive[idx] = true;
                    back[idx] = k;
                    pred_rank[idx] = r;
                }
            }
        }

        // rank states by (predecessor prefix rank, current label name)
        let mut order: Vec<usize> = (0..n_mid * n_cur).filter(|&k| next_alive[k]).collect();
        order.sort_by_key(|&k| (pred_rank[k], k % n_cur));
        let mut next_rank = vec![u32::MAX; n_mid * n_cur];
        for (r, &k) in order.iter().enumerate() {
            next_rank[k] = r as u32;
        }
        apply_beam(&mut next_alive, &next_score, &next_rank, opts.beam);

        score = next_score;
        alive = next_alive;
        rank = next_rank;
        backptr.push(back);
        prev_len = n_mid;
    }

    // close with the EOS transition
    let last = columns.len() - 1;
    let n_cur = columns[last].labels.len();
    let mut best: Option<(f64, u32, usize)> = None;
    for k in 0..score.len() {
        if !alive[k] {
            continue;
        }
        let a = if last >= 1 {
            columns[last - 1].labels[k / n_cur]
        } else {
            Label::BOS
        };
        let b = columns[last].labels[k % n_cur];
        let s = score[k] + model.ln_contextual_prob(a, b, Label::EOS);
        let better = match best {
            None => true,
            Some((bs, br, _)) => s > bs || (s == bs && rank[k] < br),
        };
        if better {
            best = Some((s, rank[k], k));
        }
    }
    let (log_prob, _, mut k) = best.expect("at least one live state");
    if log_prob == f64::NEG_INFINITY {
        return Ok(fallback_labels(words, &columns, model));
    }

    let mut labels = vec![Label::BOS; columns.len()];
    for i in (0..columns.len()).rev() {
        let n_cur = columns[i].labels.len();
        labels[i] = columns[i].labels[k % n_cur];
        if i > 0 {
            k = backptr[i][k] as usize;
        }
    }
    Ok(Decoded {
        labels,
        log_prob,
        fallback: false,
    })
}

fn apply_beam(alive: &mut [bool], score: &[f64], rank: &[u32], beam: Option<usize>) {
    let Some(width) = beam else { return };
    let mut live: Vec<usize> = (0..alive.len()).filter(|&k| alive[k]).collect();
    if live.len() <= width.max(1) {
        return;
    }
    live.sort_by(|&x, &y| score[y].total_cmp(&score[x]).then(rank[x].cmp(&rank[y])));
    for &k in &live[width.max(1)..] {
        alive[k] = false;
    }
}

// Per-token most frequent candidate: emission count, then label count, then name.
fn fallback_labels(words: &[&str], columns: &[Column], model: &TrigramModel) -> Decoded {
    let counts = model.counts();
    let labels = words
        .iter()
        .zip(columns)
        .map(|(&w, col)| {
            *col.labels
                .iter()
                .max_by(|&&x, &&y| {
                    (counts.emission(x, w), counts.unigram(x))
                        .cmp(&(counts.emission(y, w), counts.unigram(y)))
                        .then_with(|| model.label_name(y).cmp(model.label_name(x)))
                })
                .expect("non-empty candidate column")
        })
        .collect();
    Decoded {
        labels,
        log_prob: f64::NEG_INFINITY,
        fallback: true,
    }
}

/// Plain decoding over original tags: `lexicon` must share the model's labels.
pub fn viterbi_tag(words: &[&str], model: &TrigramModel, lexicon: &Lexicon) -> Result<Decoded> {
    let candidates: Vec<Candidates> = words
        .iter()
        .map(|w| match lexicon.tags_of(w) {
            [] => Candidates::Unknown,
            tags => Candidates::Known(tags.iter().map(|&t| Label::from(t)).collect()),
        })
        .collect();
    decode(words, &candidates, model, DecodeOptions::default())
}

/// One tagged sentence over original tags.
#[derive(Clone, Debug, PartialEq)]
pub struct TagSequence {
    pub tags: Vec<TagId>,
    /// Cluster index assigned by the decoder for each token.
    pub clusters: Vec<usize>,
    /// Unknown-word tokens whose original tag is a guess.
    pub guessed: Vec<bool>,
    /// The sentence was decoded by the per-token fallback.
    pub fallback: bool,
}

impl TagSequence {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Decodes with a model over clusters and restores original tags.
#[derive(Clone, Copy)]
pub struct Tagger<'a> {
    model: &'a TrigramModel,
    clustering: &'a ClusterTagset,
    lexicon: &'a Lexicon,
    opts: DecodeOptions,
}

impl<'a> Tagger<'a> {
    pub fn new(
        model: &'a TrigramModel,
        clustering: &'a ClusterTagset,
        lexicon: &'a Lexicon,
    ) -> Result<Self> {
        if model.num_labels() != clustering.len() {
            return Err(Error::LengthMismatch(format!(
                "model has {} labels, clustering has {} clusters",
                model.num_labels(),
                clustering.len()
            )));
        }
        if clustering.tagset() != lexicon.tagset() {
            return Err(Error::Config(
                "clustering and lexicon use different tagsets".into(),
            ));
        }
        Ok(Tagger {
            model,
            clustering,
            lexicon,
            opts: DecodeOptions::default(),
        })
    }

    pub fn with_options(mut self, opts: DecodeOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn candidates(&self, word: &str) -> Candidates {
        match self.lexicon.tags_of(word) {
            [] => Candidates::Unknown,
            tags => {
                let mut labels: Vec<Label> = tags
                    .iter()
                    .map(|&t| Label(self.clustering.cluster_of(t) as u32))
                    .collect();
                labels.sort_unstable();
                labels.dedup();
                Candidates::Known(labels)
            }
        }
    }

    pub fn tag_and_restore(&self, words: &[&str]) -> Result<TagSequence> {
        let candidates: Vec<Candidates> = words.iter().map(|w| self.candidates(w)).collect();
        let decoded = decode(words, &candidates, self.model, self.opts)?;
        let mut out = TagSequence {
            tags: Vec::with_capacity(words.len()),
            clusters: Vec::with_capacity(words.len()),
            guessed: Vec::with_capacity(words.len()),
            fallback: decoded.fallback,
        };
        for (&w, &label) in words.iter().zip(&decoded.labels) {
            let cluster = self.clustering.cluster(label.index());
            let (tag, guessed) = if self.lexicon.is_known(w) {
                (restore_original(w, cluster, self.lexicon)?, false)
            } else {
                (self.most_frequent_member(label.index()), true)
            };
            out.tags.push(tag);
            out.clusters.push(label.index());
            out.guessed.push(guessed);
        }
        Ok(out)
    }

    fn most_frequent_member(&self, cluster: usize) -> TagId {
        let tagset = self.lexicon.tagset();
        *self
            .clustering
            .cluster(cluster)
            .members()
            .iter()
            .max_by(|&&x, &&y| {
                self.lexicon
                    .tag_total(x)
                    .cmp(&self.lexicon.tag_total(y))
                    .then_with(|| tagset.name(y).cmp(tagset.name(x)))
            })
            .expect("clusters are non-empty")
    }

    pub fn tag_sentence(&self, sentence: &Sentence) -> Result<TagSequence> {
        self.tag_and_restore(&sentence.words())
    }

    /// Tags every sentence, in parallel, preserving input order.
    pub fn tag_corpus(&self, corpus: &Corpus) -> Result<Vec<TagSequence>> {
        corpus
            .sentences()
            .par_iter()
            .map(|s| self.tag_sentence(s))
            .collect()
    }

    pub fn tag_all(&self, sentences: &[Vec<String>]) -> Result<Vec<TagSequence>> {
        sentences
            .par_iter()
            .map(|s| {
                let words: Vec<&str> = s.iter().map(String::as_str).collect();
                self.tag_and_restore(&words)
            })
            .collect()
    }
}
