//! Synthetic tagged corpora with planted redundant tag pairs.
//!
//! Sentences are generated from a second-order Markov chain over hidden
//! classes. Most classes surface as one tag; a planted class surfaces as one
//! of two tags chosen by a fair coin, so the two tags share every contextual
//! distribution while drawing words from disjoint vocabularies. A pool of
//! ambiguous words, each shared by two or three tags (never both members of a
//! planted pair), makes decoding depend on context.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence, TaggedToken};
use crate::error::{Error, Result};
use crate::tagset::{TagId, Tagset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Surface tags in total, planted pairs included.
    pub tags: usize,
    pub planted_pairs: usize,
    /// Approximate number of distinct word types.
    pub vocabulary: usize,
    pub sentences: usize,
    pub seed: u64,
    /// Share of tokens drawn from the ambiguous word pool.
    pub ambiguity: f64,
    pub min_length: usize,
    pub max_length: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            tags: 20,
            planted_pairs: 3,
            vocabulary: 2000,
            sentences: 5000,
            seed: 1,
            ambiguity: 0.3,
            min_length: 5,
            max_length: 15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Tag names of each planted pair.
    pub planted: Vec<(String, String)>,
}

struct Surface {
    own: Vec<String>,
    own_weights: WeightedIndex<f64>,
    ambiguous: Vec<String>,
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    let classes = config
        .tags
        .checked_sub(config.planted_pairs)
        .filter(|&c| c >= 2 && c >= config.planted_pairs)
        .ok_or_else(|| {
            Error::Config(format!(
                "{} tags cannot hold {} planted pairs",
                config.tags, config.planted_pairs
            ))
        })?;
    if config.min_length == 0 || config.min_length > config.max_length {
        return Err(Error::Config("invalid sentence length range".into()));
    }
    if !(0.0..=1.0).contains(&config.ambiguity) {
        return Err(Error::Config("ambiguity must lie in [0, 1]".into()));
    }
    if config.vocabulary < config.tags * 2 {
        return Err(Error::Config(
            "vocabulary too small for the tag count".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // hidden classes 0..planted_pairs surface as pairs
    let mut tagset = Tagset::new();
    let mut surfaces_of: Vec<Vec<TagId>> = Vec::with_capacity(classes);
    let mut planted = Vec::new();
    for class in 0..classes {
        if class < config.planted_pairs {
            let a = format!("T{:02}a", class + 1);
            let b = format!("T{:02}b", class + 1);
            surfaces_of.push(vec![tagset.intern(&a), tagset.intern(&b)]);
            planted.push((a, b));
        } else {
            surfaces_of.push(vec![tagset.intern(&format!("T{:02}", class + 1))]);
        }
    }
    let n_tags = tagset.len();
    let partner: Vec<Option<TagId>> = {
        let mut p = vec![None; n_tags];
        for s in &surfaces_of {
            if let [a, b] = s.as_slice() {
                p[a.index()] = Some(*b);
                p[b.index()] = Some(*a);
            }
        }
        p
    };

    // ambiguous words, each shared by 2 or 3 tags that are not planted partners
    let n_ambiguous = (config.vocabulary / 20).max(1);
    let mut ambiguous: Vec<Vec<String>> = vec![Vec::new(); n_tags];
    let all_tags: Vec<usize> = (0..n_tags).collect();
    for i in 0..n_ambiguous {
        let want = if rng.random_bool(0.25) { 3 } else { 2 };
        let mut chosen: Vec<usize> = Vec::new();
        for &t in all_tags.choose_multiple(&mut rng, n_tags) {
            let clash = chosen.iter().any(|&c| partner[c] == Some(TagId(t as u32)));
            if !clash {
                chosen.push(t);
            }
            if chosen.len() == want {
                break;
            }
        }
        let word = format!("amb{i}");
        for t in chosen {
            ambiguous[t].push(word.clone());
        }
    }

    let own_size = ((config.vocabulary - n_ambiguous) / n_tags).max(1);
    let surfaces: Vec<Surface> = (0..n_tags)
        .map(|t| {
            let own: Vec<String> = (0..own_size).map(|i| format!("w{t}_{i}")).collect();
            // Zipf-like word frequencies
            let weights: Vec<f64> = (0..own_size).map(|i| 1.0 / (i + 1) as f64).collect();
            Surface {
                own,
                own_weights: WeightedIndex::new(weights).expect("positive weights"),
                ambiguous: std::mem::take(&mut ambiguous[t]),
            }
        })
        .collect();

    // second-order transitions over hidden classes; index classes as BOS = classes
    let states = classes + 1;
    let first_order: Vec<Vec<f64>> = (0..states)
        .map(|_| sparse_row(&mut rng, classes, 4))
        .collect();
    let transitions: Vec<WeightedIndex<f64>> = (0..states * states)
        .map(|ctx| {
            let prev = ctx % states;
            let own = sparse_row(&mut rng, classes, 3);
            let row: Vec<f64> = own
                .iter()
                .zip(&first_order[prev])
                .map(|(a, b)| 0.6 * a + 0.4 * b + 1e-3)
                .collect();
            WeightedIndex::new(row).expect("positive weights")
        })
        .collect();

    let mut sentences = Vec::with_capacity(config.sentences);
    for _ in 0..config.sentences {
        let len = rng.random_range(config.min_length..=config.max_length);
        let (mut p2, mut p1) = (classes, classes);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            let class = transitions[p2 * states + p1].sample(&mut rng);
            let tag = *surfaces_of[class].choose(&mut rng).expect("non-empty");
            let s = &surfaces[tag.index()];
            let word = if !s.ambiguous.is_empty() && rng.random_bool(config.ambiguity) {
                s.ambiguous.choose(&mut rng).expect("non-empty").clone()
            } else {
                s.own[s.own_weights.sample(&mut rng)].clone()
            };
            tokens.push(TaggedToken { word, tag });
            (p2, p1) = (p1, class);
        }
        sentences.push(Sentence::new(tokens)?);
    }

    Ok(SyntheticCorpus {
        corpus: Corpus::from_sentences(sentences, tagset)?,
        planted,
    })
}

// Distribution concentrated on `k` random successors.
fn sparse_row(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    for &i in idx.iter().take(k.min(n)) {
        row[i] = rng.random_range(0.2..1.0);
    }
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= sum);
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{Casing, Lexicon};
    use crate::tagset::cluster_admissible;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            sentences: 300,
            vocabulary: 400,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.corpus, b.corpus);
        let c = generate(&SyntheticConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn planted_pairs_are_admissible() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.corpus.tagset().len(), 20);
        assert_eq!(s.planted.len(), 3);
        let lex = Lexicon::build(&s.corpus, Casing::Preserve);
        for (a, b) in &s.planted {
            let ts = lex.tagset();
            assert!(cluster_admissible(
                &[ts.get(a).unwrap(), ts.get(b).unwrap()],
                &lex
            ));
        }
        // the ambiguous pool rules out some pairs
        let ids: Vec<TagId> = lex.tagset().ids().collect();
        let blocked = ids
            .iter()
            .flat_map(|&a| ids.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| a < b && !cluster_admissible(&[a, b], &lex))
            .count();
        assert!(blocked > 0);
    }

    #[test]
    fn lengths_and_size() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.corpus.len(), 300);
        assert!(s
            .corpus
            .sentences()
            .iter()
            .all(|x| (5..=15).contains(&x.len())));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate(&SyntheticConfig {
            tags: 4,
            planted_pairs: 3,
            ..small()
        })
        .is_err());
        assert!(generate(&SyntheticConfig {
            min_length: 0,
            ..small()
        })
        .is_err());
        assert!(generate(&SyntheticConfig {
            ambiguity: 1.5,
            ..small()
        })
        .is_err());
    }
}
