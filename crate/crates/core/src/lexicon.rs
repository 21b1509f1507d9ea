//! Word to original-tag membership with emission counts.

use std::borrow::Cow;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::tagset::{TagId, Tagset};

/// How word forms are normalized before lookup and counting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Casing {
    #[default]
    Preserve,
    Lower,
}

impl Casing {
    pub fn from_lowercase_flag(lowercase: bool) -> Self {
        if lowercase {
            Casing::Lower
        } else {
            Casing::Preserve
        }
    }

    pub fn apply<'a>(self, word: &'a str) -> Cow<'a, str> {
        match self {
            Casing::Preserve => Cow::Borrowed(word),
            Casing::Lower if word.chars().any(char::is_uppercase) => {
                Cow::Owned(word.to_lowercase())
            }
            Casing::Lower => Cow::Borrowed(word),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Entry {
    // sorted by TagId, parallel vectors
    tags: Vec<TagId>,
    counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    tagset: Tagset,
    casing: Casing,
    entries: FxHashMap<String, Entry>,
    tag_totals: Vec<u64>,
    token_total: u64,
    // (lo, hi) tag pair -> smallest word carrying both
    conflicts: FxHashMap<(TagId, TagId), String>,
}

impl Lexicon {
    pub fn build(corpus: &Corpus, casing: Casing) -> Lexicon {
        let tagset = corpus.tagset().clone();
        let mut entries: FxHashMap<String, Entry> = FxHashMap::default();
        let mut tag_totals = vec![0u64; tagset.len()];
        let mut token_total = 0;
        for token in corpus.tokens() {
            let entry = entries
                .entry(casing.apply(&token.word).into_owned())
                .or_default();
            match entry.tags.binary_search(&token.tag) {
                Ok(i) => entry.counts[i] += 1,
                Err(i) => {
                    entry.tags.insert(i, token.tag);
                    entry.counts.insert(i, 1);
                }
            }
            tag_totals[token.tag.index()] += 1;
            token_total += 1;
        }

        let mut conflicts: FxHashMap<(TagId, TagId), String> = FxHashMap::default();
        for (word, entry) in &entries {
            for (i, &a) in entry.tags.iter().enumerate() {
                for &b in &entry.tags[i + 1..] {
                    conflicts
                        .entry((a, b))
                        .and_modify(|w| {
                            if word < w {
                                w.clone_from(word);
                            }
                        })
                        .or_insert_with(|| word.clone());
                }
            }
        }

        Lexicon {
            tagset,
            casing,
            entries,
            tag_totals,
            token_total,
            conflicts,
        }
    }

    pub fn tagset(&self) -> &Tagset {
        &self.tagset
    }

    pub fn casing(&self) -> Casing {
        self.casing
    }

    /// Tags attested for `word`, sorted by id. Empty iff the word is unknown.
    pub fn tags_of(&self, word: &str) -> &[TagId] {
        self.entries
            .get(self.casing.apply(word).as_ref())
            .map_or(&[], |e| e.tags.as_slice())
    }

    pub fn is_known(&self, word: &str) -> bool {
        !self.tags_of(word).is_empty()
    }

    pub fn count(&self, word: &str, tag: TagId) -> u64 {
        self.entries
            .get(self.casing.apply(word).as_ref())
            .and_then(|e| e.tags.binary_search(&tag).ok().map(|i| e.counts[i]))
            .unwrap_or(0)
    }

    pub fn tag_total(&self, tag: TagId) -> u64 {
        self.tag_totals.get(tag.index()).copied().unwrap_or(0)
    }

    pub fn token_total(&self) -> u64 {
        self.token_total
    }

    pub fn num_words(&self) -> usize {
        self.entries.len()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Every `(word, tag, count)` triple, in no particular order.
    pub fn memberships(&self) -> impl Iterator<Item = (&str, TagId, u64)> {
        self.entries.iter().flat_map(|(w, e)| {
            e.tags
                .iter()
                .zip(&e.counts)
                .map(move |(&t, &c)| (w.as_str(), t, c))
        })
    }

    /// A word carrying both `a` and `b`, if any.
    pub fn conflict(&self, a: TagId, b: TagId) -> Option<&str> {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.conflicts.get(&key).map(String::as_str)
    }

    /// First conflicting pair inside `tags`, with its witness word.
    pub fn conflict_within(&self, tags: &[TagId]) -> Option<(&str, TagId, TagId)> {
        for (i, &a) in tags.iter().enumerate() {
            for &b in &tags[i + 1..] {
                if a != b {
                    if let Some(w) = self.conflict(a, b) {
                        return Some((w, a, b));
                    }
                }
            }
        }
        None
    }

    /// First conflicting pair with one tag from each side.
    pub fn cross_conflict(&self, left: &[TagId], right: &[TagId]) -> Option<(&str, TagId, TagId)> {
        for &a in left {
            for &b in right {
                if a != b {
                    if let Some(w) = self.conflict(a, b) {
                        return Some((w, a, b));
                    }
                }
            }
        }
        None
    }

    /// Lines `word<TAB>tag<TAB>count`, sorted by word then tag name.
    pub fn dump(&self) -> String {
        let mut rows: Vec<(&str, &str, u64)> = self
            .memberships()
            .map(|(w, t, c)| (w, self.tagset.name(t), c))
            .collect();
        rows.sort_unstable();
        let mut out = String::new();
        for (w, t, c) in rows {
            out.push_str(&format!("{w}\t{t}\t{c}\n"));
        }
        out
    }
}
