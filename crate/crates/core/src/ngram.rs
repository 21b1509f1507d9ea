//! Tag n-gram counts, deleted-interpolation smoothing and the trigram model.
//!
//! Each sentence is padded as `BOS BOS t1 .. tn EOS` and every unigram, bigram
//! and trigram window of the padded sequence is counted. Counts can be taken
//! over original tags or over the clusters of a [`ClusterTagset`], and counts
//! over original tags can be projected onto any clustering without revisiting
//! the corpus.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lexicon::Casing;
use crate::tagset::{ClusterTagset, TagId, BOS_NAME, EOS_NAME};

/// A model label: an original tag or a cluster index, or a boundary pseudo-tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub u32);

impl Label {
    pub const BOS: Label = Label(u32::MAX - 1);
    pub const EOS: Label = Label(u32::MAX);

    pub fn is_boundary(self) -> bool {
        self == Label::BOS || self == Label::EOS
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<TagId> for Label {
    fn from(t: TagId) -> Label {
        Label(t.0)
    }
}

/// Raw n-gram and emission counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgramCounts {
    labels: Vec<String>,
    casing: Casing,
    unigram: FxHashMap<Label, u64>,
    bigram: FxHashMap<(Label, Label), u64>,
    trigram: FxHashMap<(Label, Label, Label), u64>,
    // word -> label -> count
    emission: FxHashMap<String, BTreeMap<Label, u64>>,
    token_total: u64,
    sentence_total: u64,
}

impl NgramCounts {
    fn empty(labels: Vec<String>, casing: Casing) -> Self {
        NgramCounts {
            labels,
            casing,
            unigram: FxHashMap::default(),
            bigram: FxHashMap::default(),
            trigram: FxHashMap::default(),
            emission: FxHashMap::default(),
            token_total: 0,
            sentence_total: 0,
        }
    }

    /// Counts a corpus, optionally replacing each tag by its cluster first.
    pub fn count(corpus: &Corpus, mapping: Option<&ClusterTagset>, casing: Casing) -> Result<Self> {
        let tagset = corpus.tagset();
        let labels = match mapping {
            Some(m) => {
                if m.num_tags() != tagset.len() || m.tagset() != tagset {
                    return Err(Error::NotAPartition(format!(
                        "mapping covers {} tags, corpus has {}",
                        m.num_tags(),
                        tagset.len()
                    )));
                }
                m.names()
            }
            None => tagset.names().to_vec(),
        };
        let label_of = |t: TagId| match mapping {
            Some(m) => Label(m.cluster_of(t) as u32),
            None => Label::from(t),
        };

        let mut counts = NgramCounts::empty(labels, casing);
        let mut padded = Vec::new();
        for sentence in corpus.sentences() {
            padded.clear();
            padded.extend([Label::BOS, Label::BOS]);
            for tok in sentence.tokens() {
                let label = label_of(tok.tag);
                padded.push(label);
                *counts
                    .emission
                    .entry(casing.apply(&tok.word).into_owned())
                    .or_default()
                    .entry(label)
                    .or_insert(0) += 1;
            }
            padded.push(Label::EOS);
            counts.add_padded(&padded);
            counts.token_total += sentence.len() as u64;
            counts.sentence_total += 1;
        }
        Ok(counts)
    }

    fn add_padded(&mut self, padded: &[Label]) {
        for &l in padded {
            *self.unigram.entry(l).or_insert(0) += 1;
        }
        for w in padded.windows(2) {
            *self.bigram.entry((w[0], w[1])).or_insert(0) += 1;
        }
        for w in padded.windows(3) {
            *self.trigram.entry((w[0], w[1], w[2])).or_insert(0) += 1;
        }
    }

    /// Sums every count into its image under the tag-to-cluster map.
    pub fn project(&self, mapping: &ClusterTagset) -> Result<NgramCounts> {
        if mapping.num_tags() != self.labels.len()
            || mapping.tagset().names() != self.labels.as_slice()
        {
            return Err(Error::NotAPartition(format!(
                "mapping covers {} tags, counts have {} labels",
                mapping.num_tags(),
                self.labels.len()
            )));
        }
        let map = |l: Label| {
            if l.is_boundary() {
                l
            } else {
                Label(mapping.cluster_of(TagId(l.0)) as u32)
            }
        };
        let mut out = NgramCounts::empty(mapping.names(), self.casing);
        for (&l, &c) in &self.unigram {
            *out.unigram.entry(map(l)).or_insert(0) += c;
        }
        for (&(a, b), &c) in &self.bigram {
            *out.bigram.entry((map(a), map(b))).or_insert(0) += c;
        }
        for (&(a, b, d), &c) in &self.trigram {
            *out.trigram.entry((map(a), map(b), map(d))).or_insert(0) += c;
        }
        for (word, per_label) in &self.emission {
            let target = out.emission.entry(word.clone()).or_default();
            for (&l, &c) in per_label {
                *target.entry(map(l)).or_insert(0) += c;
            }
        }
        out.token_total = self.token_total;
        out.sentence_total = self.sentence_total;
        Ok(out)
    }

    /// Adds `other` into `self`. Both must be over the same labels.
    pub fn merge_from(&mut self, other: &NgramCounts) -> Result<()> {
        if self.labels != other.labels || self.casing != other.casing {
            return Err(Error::Config(
                "cannot add counts over different labels".into(),
            ));
        }
        for (&k, &c) in &other.unigram {
            *self.unigram.entry(k).or_insert(0) += c;
        }
        for (&k, &c) in &other.bigram {
            *self.bigram.entry(k).or_insert(0) += c;
        }
        for (&k, &c) in &other.trigram {
            *self.trigram.entry(k).or_insert(0) += c;
        }
        for (w, per_label) in &other.emission {
            let target = self.emission.entry(w.clone()).or_default();
            for (&l, &c) in per_label {
                *target.entry(l).or_insert(0) += c;
            }
        }
        self.token_total += other.token_total;
        self.sentence_total += other.sentence_total;
        Ok(())
    }

    /// Appends zero-count labels so that counts over a tagset prefix line up
    /// with a larger tagset.
    pub fn extend_labels(&mut self, names: &[String]) -> Result<()> {
        if names.len() < self.labels.len() || names[..self.labels.len()] != self.labels[..] {
            return Err(Error::Config(
                "label list does not extend the counted labels".into(),
            ));
        }
        self.labels = names.to_vec();
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_name(&self, l: Label) -> &str {
        match l {
            Label::BOS => BOS_NAME,
            Label::EOS => EOS_NAME,
            l => &self.labels[l.index()],
        }
    }

    pub fn casing(&self) -> Casing {
        self.casing
    }

    pub fn unigram(&self, a: Label) -> u64 {
        self.unigram.get(&a).copied().unwrap_or(0)
    }

    pub fn bigram(&self, a: Label, b: Label) -> u64 {
        self.bigram.get(&(a, b)).copied().unwrap_or(0)
    }

    pub fn trigram(&self, a: Label, b: Label, c: Label) -> u64 {
        self.trigram.get(&(a, b, c)).copied().unwrap_or(0)
    }

    pub fn emission(&self, label: Label, word: &str) -> u64 {
        self.emission
            .get(self.casing.apply(word).as_ref())
            .and_then(|m| m.get(&label).copied())
            .unwrap_or(0)
    }

    /// Labels that emitted `word`, with counts.
    pub fn emissions_of(&self, word: &str) -> Option<&BTreeMap<Label, u64>> {
        self.emission.get(self.casing.apply(word).as_ref())
    }

    pub fn unigrams(&self) -> &FxHashMap<Label, u64> {
        &self.unigram
    }

    pub fn bigrams(&self) -> &FxHashMap<(Label, Label), u64> {
        &self.bigram
    }

    pub fn trigrams(&self) -> &FxHashMap<(Label, Label, Label), u64> {
        &self.trigram
    }

    pub fn token_total(&self) -> u64 {
        self.token_total
    }

    pub fn sentence_total(&self) -> u64 {
        self.sentence_total
    }

    pub fn is_empty(&self) -> bool {
        self.trigram.is_empty()
    }
}

/// Interpolation weights for the unigram, bigram and trigram estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub unigram: f64,
    pub bigram: f64,
    pub trigram: f64,
}

impl Lambdas {
    pub fn sum(&self) -> f64 {
        self.unigram + self.bigram + self.trigram
    }
}

/// Denominators of the three relative-frequency estimates.
#[derive(Clone, Debug)]
struct Histories {
    // Σ_{t != BOS} uni(t)
    unigram_total: u64,
    // Σ_{x != BOS} bi(t, x)
    bigram: FxHashMap<Label, u64>,
    // Σ_x tri(a, b, x)
    trigram: FxHashMap<(Label, Label), u64>,
}

impl Histories {
    fn new(counts: &NgramCounts) -> Self {
        let unigram_total = counts
            .unigram
            .iter()
            .filter(|(l, _)| **l != Label::BOS)
            .map(|(_, c)| c)
            .sum();
        let mut bigram: FxHashMap<Label, u64> = FxHashMap::default();
        for (&(a, b), &c) in &counts.bigram {
            if b != Label::BOS {
                *bigram.entry(a).or_insert(0) += c;
            }
        }
        let mut trigram: FxHashMap<(Label, Label), u64> = FxHashMap::default();
        for (&(a, b, _), &c) in &counts.trigram {
            *trigram.entry((a, b)).or_insert(0) += c;
        }
        Histories {
            unigram_total,
            bigram,
            trigram,
        }
    }

    fn bigram(&self, a: Label) -> u64 {
        self.bigram.get(&a).copied().unwrap_or(0)
    }

    fn trigram(&self, a: Label, b: Label) -> u64 {
        self.trigram.get(&(a, b)).copied().unwrap_or(0)
    }
}

fn discounted(num: u64, den: u64) -> f64 {
    if den > 1 {
        (num - 1) as f64 / (den - 1) as f64
    } else {
        0.0
    }
}

/// Deleted interpolation: every trigram type credits its count to the order
/// whose leave-one-out relative frequency is largest, ties going to the lower
/// order. Credits are normalized to weights that sum to exactly 1.
pub fn estimate_lambdas(counts: &NgramCounts) -> Result<Lambdas> {
    if counts.is_empty() {
        return Err(Error::EmptyCounts);
    }
    let hist = Histories::new(counts);
    let mut credit = [0u64; 3];
    for (&(a, b, c), &n) in &counts.trigram {
        let tri = discounted(n, hist.trigram(a, b));
        let bi = discounted(counts.bigram(b, c), hist.bigram(b));
        let uni = discounted(counts.unigram(c), hist.unigram_total);
        let slot = if uni >= bi && uni >= tri {
            0
        } else if bi >= tri {
            1
        } else {
            2
        };
        credit[slot] += n;
    }
    Ok(normalize_credits(credit))
}

// Weights are multiples of 2^-52, so any summation order gives exactly 1.0.
fn normalize_credits(credit: [u64; 3]) -> Lambdas {
    const SCALE: u128 = 1 << 52;
    let total: u128 = credit.iter().map(|&c| c as u128).sum();
    let mut q = credit.map(|c| c as u128 * SCALE / total);
    let residual = SCALE - q.iter().sum::<u128>();
    let largest = (0..3)
        .max_by_key(|&i| (credit[i], std::cmp::Reverse(i)))
        .unwrap();
    q[largest] += residual;
    let w = q.map(|x| x as f64 / SCALE as f64);
    Lambdas {
        unigram: w[0],
        bigram: w[1],
        trigram: w[2],
    }
}

/// Interpolated trigram transitions and unsmoothed emissions.
#[derive(Clone, Debug)]
pub struct TrigramModel {
    counts: NgramCounts,
    lambdas: Lambdas,
    hist: Histories,
}

impl TrigramModel {
    /// Builds a model with deleted-interpolation weights.
    pub fn from_counts(counts: NgramCounts) -> Result<Self> {
        let lambdas = estimate_lambdas(&counts)?;
        Ok(Self::with_lambdas(counts, lambdas))
    }

    pub fn with_lambdas(counts: NgramCounts, lambdas: Lambdas) -> Self {
        let hist = Histories::new(&counts);
        TrigramModel {
            counts,
            lambdas,
            hist,
        }
    }

    pub fn train(corpus: &Corpus, mapping: Option<&ClusterTagset>, casing: Casing) -> Result<Self> {
        Self::from_counts(NgramCounts::count(corpus, mapping, casing)?)
    }

    pub fn counts(&self) -> &NgramCounts {
        &self.counts
    }

    pub fn lambdas(&self) -> Lambdas {
        self.lambdas
    }

    pub fn num_labels(&self) -> usize {
        self.counts.num_labels()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        (0..self.counts.num_labels() as u32).map(Label)
    }

    pub fn label_name(&self, l: Label) -> &str {
        self.counts.label_name(l)
    }

    /// p(t3 | t1, t2) = λ1·p̂(t3) + λ2·p̂(t3|t2) + λ3·p̂(t3|t1,t2); each
    /// relative frequency is 0 when its history was never seen.
    pub fn contextual_prob(&self, t1: Label, t2: Label, t3: Label) -> f64 {
        if t3 == Label::BOS {
            return 0.0;
        }
        let c = &self.counts;
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let uni = ratio(c.unigram(t3), self.hist.unigram_total);
        let bi = ratio(c.bigram(t2, t3), self.hist.bigram(t2));
        let tri = ratio(c.trigram(t1, t2, t3), self.hist.trigram(t1, t2));
        self.lambdas.unigram * uni + self.lambdas.bigram * bi + self.lambdas.trigram * tri
    }

    pub fn ln_contextual_prob(&self, t1: Label, t2: Label, t3: Label) -> f64 {
        self.contextual_prob(t1, t2, t3).ln()
    }

    /// count(t, word) / count(t); 0 for unseen pairs and unseen tags.
    pub fn lexical_prob(&self, word: &str, t: Label) -> f64 {
        let total = self.counts.unigram(t);
        if total == 0 || t.is_boundary() {
            return 0.0;
        }
        self.counts.emission(t, word) as f64 / total as f64
    }

    pub fn ln_lexical_prob(&self, word: &str, t: Label) -> f64 {
        self.lexical_prob(word, t).ln()
    }

    /// True when `(t1, t2)` occurred as a trigram history in training.
    pub fn context_seen(&self, t1: Label, t2: Label) -> bool {
        self.hist.trigram(t1, t2) > 0
    }

    /// True when the model saw `word` emitted by any label.
    pub fn knows_word(&self, word: &str) -> bool {
        self.counts.emissions_of(word).is_some()
    }

    /// Sorted text dump, loadable with [`TrigramModel::parse_dump`].
    pub fn dump(&self) -> String {
        let c = &self.counts;
        let name = |l: Label| c.label_name(l);
        let mut out = String::new();
        out.push_str(&format!(
            "CASING\t{}\n",
            match c.casing {
                Casing::Preserve => "preserve",
                Casing::Lower => "lower",
            }
        ));
        for (i, l) in c.labels.iter().enumerate() {
            out.push_str(&format!("LABEL\t{i}\t{l}\n"));
        }
        out.push_str(&format!("SENTENCES\t{}\n", c.sentence_total));
        out.push_str(&format!("TOKENS\t{}\n", c.token_total));

        let mut lines: Vec<String> = c
            .unigram
            .iter()
            .map(|(&a, n)| format!("UNI\t{}\t{n}", name(a)))
            .collect();
        lines.sort_unstable();
        let mut block: Vec<String> = c
            .bigram
            .iter()
            .map(|(&(a, b), n)| format!("BI\t{} {}\t{n}", name(a), name(b)))
            .collect();
        block.sort_unstable();
        lines.extend(block);
        let mut block: Vec<String> = c
            .trigram
            .iter()
            .map(|(&(a, b, d), n)| format!("TRI\t{} {} {}\t{n}", name(a), name(b), name(d)))
            .collect();
        block.sort_unstable();
        lines.extend(block);
        let mut block: Vec<String> = c
            .emission
            .iter()
            .flat_map(|(w, m)| {
                m.iter()
                    .map(move |(&l, n)| format!("EMIT\t{} {w}\t{n}", name(l)))
            })
            .collect();
        block.sort_unstable();
        lines.extend(block);
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        let l = self.lambdas;
        out.push_str(&format!(
            "LAMBDA\t{} {} {}\n",
            l.unigram, l.bigram, l.trigram
        ));
        out
    }

    pub fn parse_dump(text: &str) -> Result<TrigramModel> {
        let mut labels: Vec<String> = Vec::new();
        let mut index: FxHashMap<String, Label> = FxHashMap::default();
        index.insert(BOS_NAME.into(), Label::BOS);
        index.insert(EOS_NAME.into(), Label::EOS);
        let mut counts = NgramCounts::empty(Vec::new(), Casing::Preserve);
        let mut lambdas = None;

        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let err = |m: &str| Error::ModelFormat {
                line: lineno,
                message: m.to_owned(),
            };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| s.parse::<u64>().map_err(|_| err("bad count"));
            let label = |s: &str| index.get(s).copied().ok_or_else(|| err("unknown label"));
            match fields.as_slice() {
                ["CASING", "preserve"] => counts.casing = Casing::Preserve,
                ["CASING", "lower"] => counts.casing = Casing::Lower,
                ["LABEL", idx, name] => {
                    if num(idx)? as usize != labels.len() {
                        return Err(err("labels out of order"));
                    }
                    index.insert((*name).to_owned(), Label(labels.len() as u32));
                    labels.push((*name).to_owned());
                }
                ["SENTENCES", n] => counts.sentence_total = num(n)?,
                ["TOKENS", n] => counts.token_total = num(n)?,
                ["UNI", a, n] => {
                    counts.unigram.insert(label(a)?, num(n)?);
                }
                ["BI", key, n] => {
                    let (a, b) = key.split_once(' ').ok_or_else(|| err("bad bigram"))?;
                    counts.bigram.insert((label(a)?, label(b)?), num(n)?);
                }
                ["TRI", key, n] => {
                    let parts: Vec<&str> = key.split(' ').collect();
                    let [a, b, c] = parts.as_slice() else {
                        return Err(err("bad trigram"));
                    };
                    counts
                        .trigram
                        .insert((label(a)?, label(b)?, label(c)?), num(n)?);
                }
                ["EMIT", key, n] => {
                    let (t, w) = key.split_once(' ').ok_or_else(|| err("bad emission"))?;
                    counts
                        .emission
                        .entry(w.to_owned())
                        .or_default()
                        .insert(label(t)?, num(n)?);
                }
                ["LAMBDA", ws] => {
                    let w: Vec<f64> = ws
                        .split(' ')
                        .map(|x| x.parse::<f64>().map_err(|_| err("bad lambda")))
                        .collect::<Result<_>>()?;
                    let [u, b, t] = w.as_slice() else {
                        return Err(err("expected three lambdas"));
                    };
                    lambdas = Some(Lambdas {
                        unigram: *u,
                        bigram: *b,
                        trigram: *t,
                    });
                }
                _ => return Err(err("unrecognized line")),
            }
        }
        counts.labels = labels;
        let lambdas = lambdas.ok_or(Error::ModelFormat {
            line: 0,
            message: "missing LAMBDA line".into(),
        })?;
        Ok(TrigramModel::with_lambdas(counts, lambdas))
    }
}
