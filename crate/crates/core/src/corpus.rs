//! Tagged corpus reading, writing and splitting.
//!
//! The on-disk format has one token per line as `word<TAB>tag`, a blank line
//! after each sentence and `#` comment lines. The last sentence may omit its
//! terminating blank line.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagset::{validate_tag_name, TagId, Tagset};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaggedToken {
    pub word: String,
    pub tag: TagId,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<TaggedToken>,
}

impl Sentence {
    pub fn new(tokens: Vec<TaggedToken>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        Ok(Sentence { tokens })
    }

    pub fn tokens(&self) -> &[TaggedToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.word.as_str()).collect()
    }

    pub fn tags(&self) -> Vec<TagId> {
        self.tokens.iter().map(|t| t.tag).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    tagset: Tagset,
}

impl Corpus {
    pub fn empty(tagset: Tagset) -> Self {
        Corpus {
            sentences: Vec::new(),
            tagset,
        }
    }

    /// Builds a corpus from already interned sentences. Every tag must be in `tagset`.
    pub fn from_sentences(sentences: Vec<Sentence>, tagset: Tagset) -> Result<Self> {
        let n = tagset.len();
        if let Some(tok) = sentences
            .iter()
            .flat_map(|s| s.tokens())
            .find(|t| t.tag.index() >= n)
        {
            return Err(Error::Config(format!(
                "token {:?} has tag id {} outside the tagset",
                tok.word, tok.tag.0
            )));
        }
        Ok(Corpus { sentences, tagset })
    }

    /// Parses corpus text, interning tags in first-seen order.
    pub fn parse(text: &str) -> Result<Corpus> {
        let mut tagset = Tagset::new();
        let sentences = parse_sentences(text, &mut tagset)?;
        if sentences.is_empty() {
            return Err(Error::NoSentences);
        }
        Ok(Corpus { sentences, tagset })
    }

    /// Parses several texts against one shared tagset. Each returned corpus
    /// carries the final, combined tagset.
    pub fn parse_many(texts: &[&str]) -> Result<Vec<Corpus>> {
        Self::parse_many_with(texts, Tagset::new())
    }

    /// Like [`Corpus::parse_many`], seeding the interner with `tagset` so its ids are kept.
    pub fn parse_many_with(texts: &[&str], mut tagset: Tagset) -> Result<Vec<Corpus>> {
        let mut parts = Vec::with_capacity(texts.len());
        for text in texts {
            let sentences = parse_sentences(text, &mut tagset)?;
            if sentences.is_empty() {
                return Err(Error::NoSentences);
            }
            parts.push(sentences);
        }
        Ok(parts
            .into_iter()
            .map(|sentences| Corpus {
                sentences,
                tagset: tagset.clone(),
            })
            .collect())
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn tagset(&self) -> &Tagset {
        &self.tagset
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &TaggedToken> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    /// Same sentences, re-labelled against a larger tagset that extends this one.
    pub fn with_tagset(self, tagset: Tagset) -> Result<Corpus> {
        if !self.tagset.is_prefix_of(&tagset) {
            return Err(Error::Config(
                "tagset does not extend the corpus tagset".into(),
            ));
        }
        Ok(Corpus {
            sentences: self.sentences,
            tagset,
        })
    }

    /// Concatenates corpora sharing one tagset.
    pub fn concat(parts: &[&Corpus]) -> Result<Corpus> {
        let Some(first) = parts.first() else {
            return Err(Error::Config("nothing to concatenate".into()));
        };
        let mut sentences = Vec::new();
        for part in parts {
            if part.tagset != first.tagset {
                return Err(Error::Config("corpus parts use different tagsets".into()));
            }
            sentences.extend(part.sentences.iter().cloned());
        }
        Ok(Corpus {
            sentences,
            tagset: first.tagset.clone(),
        })
    }

    fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            tagset: self.tagset.clone(),
        }
    }

    /// Serializes to the corpus format. Comments are not preserved.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for sentence in &self.sentences {
            for tok in &sentence.tokens {
                out.push_str(&tok.word);
                out.push('\t');
                out.push_str(self.tagset.name(tok.tag));
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

fn parse_sentences(text: &str, tagset: &mut Tagset) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let mut fields = line.split('\t');
        let (Some(word), Some(tag), None) = (fields.next(), fields.next(), fields.next()) else {
            let tabs = line.matches('\t').count();
            return Err(err(if tabs == 0 {
                "missing tab between word and tag".into()
            } else {
                format!("expected one tab, found {tabs}")
            }));
        };
        if word.is_empty() {
            return Err(err("empty word".into()));
        }
        validate_tag_name(tag).map_err(err)?;
        current.push(TaggedToken {
            word: word.to_owned(),
            tag: tagset.intern(tag),
        });
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    Ok(sentences)
}

/// Parses untagged input: one word per line (a trailing `<TAB>tag` column is
/// ignored), blank lines between sentences.
pub fn parse_words(text: &str) -> Result<Vec<Vec<String>>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let word = line.split('\t').next().unwrap_or_default();
        if word.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty word".into(),
            });
        }
        current.push(word.to_owned());
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    if sentences.is_empty() {
        return Err(Error::NoSentences);
    }
    Ok(sentences)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Contiguous,
    Shuffled,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contiguous" => Ok(SplitMode::Contiguous),
            "shuffled" => Ok(SplitMode::Shuffled),
            other => Err(Error::Config(format!("unknown split mode {other:?}"))),
        }
    }
}

/// Sizes of the training, clustering and testing parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    /// Fractions of the sentence count.
    Fractions([f64; 3]),
    /// Explicit sentence index ranges, applied after shuffling in shuffled mode.
    Ranges([Range<usize>; 3]),
}

impl SplitSpec {
    /// Parses `0.8,0.1,0.1`.
    pub fn parse_fractions(s: &str) -> Result<SplitSpec> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad fraction {p:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let fractions: [f64; 3] = parts
            .try_into()
            .map_err(|_| Error::Config("split needs exactly three fractions".into()))?;
        Ok(SplitSpec::Fractions(fractions))
    }

    fn ranges(&self, n: usize) -> Result<[Range<usize>; 3]> {
        match self {
            SplitSpec::Fractions(f) => {
                if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Config("split fractions must be non-negative".into()));
                }
                let sum: f64 = f.iter().sum();
                if sum > 1.0 + 1e-9 {
                    return Err(Error::Config(format!("split fractions sum to {sum} > 1")));
                }
                let mut start = 0;
                let mut out = [0..0, 0..0, 0..0];
                for (slot, frac) in out.iter_mut().zip(f) {
                    let size = ((frac * n as f64) + 1e-9).floor() as usize;
                    let end = (start + size).min(n);
                    *slot = start..end;
                    start = end;
                }
                Ok(out)
            }
            SplitSpec::Ranges(r) => {
                for range in r {
                    if range.start > range.end || range.end > n {
                        return Err(Error::Config(format!("range {range:?} outside 0..{n}")));
                    }
                }
                for i in 0..3 {
                    for j in i + 1..3 {
                        let (a, b) = (&r[i], &r[j]);
                        if a.start < b.end && b.start < a.end {
                            return Err(Error::Config(format!("ranges {a:?} and {b:?} overlap")));
                        }
                    }
                }
                Ok(r.clone())
            }
        }
    }
}

/// Training, clustering and testing parts drawn from one corpus.
#[derive(Clone, Debug)]
pub struct CorpusSplit {
    pub training: Corpus,
    pub clustering: Corpus,
    pub testing: Corpus,
    /// Source sentence indices of each part, in part order.
    pub indices: [Vec<usize>; 3],
    /// Source sentence indices in no part.
    pub discarded: Vec<usize>,
}

pub fn split_corpus(
    corpus: &Corpus,
    spec: &SplitSpec,
    mode: SplitMode,
    seed: u64,
) -> Result<CorpusSplit> {
    let n = corpus.len();
    let ranges = spec.ranges(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    if mode == SplitMode::Shuffled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let mut used = vec![false; n];
    let indices = ranges.map(|range| {
        let mut part: Vec<usize> = order[range].to_vec();
        if mode == SplitMode::Shuffled {
            part.sort_unstable();
        }
        for &i in &part {
            used[i] = true;
        }
        part
    });
    let discarded = (0..n).filter(|&i| !used[i]).collect();
    Ok(CorpusSplit {
        training: corpus.subset(&indices[0]),
        clustering: corpus.subset(&indices[1]),
        testing: corpus.subset(&indices[2]),
        indices,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_basic_sentence() {
        let c = Corpus::parse("the\tAT\ncliff\tNN\n\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.num_tokens(), 2);
        assert_eq!(c.tagset().names(), ["AT", "NN"]);
    }

    #[test]
    fn accepts_missing_final_blank_line() {
        let c = Corpus::parse("easier\tJJR\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.tagset().names(), ["JJR"]);
        let c = Corpus::parse("a\tX\n\nb\tY").unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn comments_and_repeated_blank_lines() {
        let c = Corpus::parse("# header\na\tX\n\n\n\n# mid\nb\tY\n\n").unwrap();
        assert_eq!(c.len(), 2);
    }

    fn parse_error_line(text: &str) -> usize {
        match Corpus::parse(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        assert_eq!(parse_error_line("a\tAT\nb\n"), 2);
        assert_eq!(parse_error_line("a\tAT\tX\n"), 1);
        assert_eq!(parse_error_line("a\tAT\n\n\tNN\n"), 3);
        assert_eq!(parse_error_line("a\t\n"), 1);
        assert_eq!(parse_error_line("a\tN N\n"), 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(Corpus::parse(""), Err(Error::NoSentences)));
        assert!(matches!(
            Corpus::parse("# only\n\n"),
            Err(Error::NoSentences)
        ));
    }

    #[test]
    fn parse_many_shares_tagset() {
        let parts = Corpus::parse_many(&["a\tX\n", "b\tY\nc\tX\n"]).unwrap();
        assert_eq!(parts[0].tagset(), parts[1].tagset());
        assert_eq!(parts[0].tagset().names(), ["X", "Y"]);
    }

    fn ten_sentences() -> Corpus {
        let text: String = (0..10).map(|i| format!("w{i}\tT{}\n\n", i % 3)).collect();
        Corpus::parse(&text).unwrap()
    }

    #[test]
    fn contiguous_split_counts() {
        let c = ten_sentences();
        let s = split_corpus(
            &c,
            &SplitSpec::Fractions([0.8, 0.1, 0.1]),
            SplitMode::Contiguous,
            0,
        )
        .unwrap();
        assert_eq!(
            (s.training.len(), s.clustering.len(), s.testing.len()),
            (8, 1, 1)
        );
        assert_eq!(s.indices[0], (0..8).collect::<Vec<_>>());
        assert_eq!(s.indices[2], vec![9]);
        assert!(s.discarded.is_empty());
    }

    #[test]
    fn empty_clustering_part_is_valid() {
        let c = ten_sentences();
        let s = split_corpus(
            &c,
            &SplitSpec::Fractions([0.9, 0.0, 0.1]),
            SplitMode::Contiguous,
            0,
        )
        .unwrap();
        assert!(s.clustering.is_empty());
        assert_eq!(s.training.len() + s.testing.len(), 10);
    }

    #[test]
    fn leftover_is_discarded() {
        let c = ten_sentences();
        let s = split_corpus(
            &c,
            &SplitSpec::Fractions([0.5, 0.2, 0.1]),
            SplitMode::Contiguous,
            0,
        )
        .unwrap();
        assert_eq!(s.discarded, vec![8, 9]);
    }

    #[test]
    fn bad_fractions_rejected() {
        let c = ten_sentences();
        for spec in [[0.8, 0.2, 0.1], [-0.1, 0.5, 0.5]] {
            assert!(matches!(
                split_corpus(&c, &SplitSpec::Fractions(spec), SplitMode::Contiguous, 0),
                Err(Error::Config(_))
            ));
        }
        let overlap = SplitSpec::Ranges([0..5, 4..6, 6..10]);
        assert!(split_corpus(&c, &overlap, SplitMode::Contiguous, 0).is_err());
        let oob = SplitSpec::Ranges([0..5, 5..6, 6..11]);
        assert!(split_corpus(&c, &oob, SplitMode::Contiguous, 0).is_err());
    }

    #[test]
    fn explicit_ranges() {
        let c = ten_sentences();
        let spec = SplitSpec::Ranges([2..7, 0..1, 8..10]);
        let s = split_corpus(&c, &spec, SplitMode::Contiguous, 0).unwrap();
        assert_eq!(s.indices[0], vec![2, 3, 4, 5, 6]);
        assert_eq!(s.discarded, vec![1, 7]);
    }

    #[test]
    fn shuffled_split_is_deterministic() {
        let c = ten_sentences();
        let spec = SplitSpec::Fractions([0.6, 0.2, 0.2]);
        let a = split_corpus(&c, &spec, SplitMode::Shuffled, 7).unwrap();
        let b = split_corpus(&c, &spec, SplitMode::Shuffled, 7).unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.training, b.training);
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(
            SplitSpec::parse_fractions("0.8,0.1,0.1").unwrap(),
            SplitSpec::Fractions([0.8, 0.1, 0.1])
        );
        assert!(SplitSpec::parse_fractions("0.8,0.1").is_err());
        assert!(SplitSpec::parse_fractions("a,b,c").is_err());
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<(String, String)>>> {
        let token = ("[a-zA-Z#]{1}[a-z.]{0,4}", "[A-Z]{1,3}[0-9]?");
        prop::collection::vec(prop::collection::vec(token, 1..6), 1..8)
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(sents in corpus_strategy()) {
            let mut text = String::new();
            for s in &sents {
                for (w, t) in s {
                    // a leading '#' would make the line a comment
                    let w = if w.starts_with('#') { format!("x{w}") } else { w.clone() };
                    text.push_str(&format!("{w}\t{t}\n"));
                }
                text.push('\n');
            }
            let corpus = Corpus::parse(&text).unwrap();
            prop_assert_eq!(corpus.to_text(), text.clone());
            prop_assert_eq!(Corpus::parse(&corpus.to_text()).unwrap(), corpus);
        }

        #[test]
        fn split_parts_partition_the_source(
            n in 1usize..60,
            f in (0.0f64..0.5, 0.0f64..0.25, 0.0f64..0.25),
            shuffled in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let text: String = (0..n).map(|i| format!("w{i}\tT\n\n")).collect();
            let c = Corpus::parse(&text).unwrap();
            let mode = if shuffled { SplitMode::Shuffled } else { SplitMode::Contiguous };
            let s = split_corpus(&c, &SplitSpec::Fractions([f.0, f.1, f.2]), mode, seed).unwrap();
            let mut all: Vec<usize> = s.indices.iter().flatten().copied().chain(s.discarded.iter().copied()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.training.len(), s.indices[0].len());
            for (part, idx) in [&s.training, &s.clustering, &s.testing].iter().zip(&s.indices) {
                for (sent, &i) in part.sentences().iter().zip(idx) {
                    prop_assert_eq!(sent, &c.sentences()[i]);
                }
            }
        }
    }
}
