//! Original tag inventory, clusters of tags, and the reduced tagset built from them.
//!
//! A [`ClusterTagset`] is a partition of the original [`Tagset`]. A cluster is only
//! *admissible* when no lexicon word carries two of its member tags; under that
//! condition [`restore_original`] recovers the original tag of every known word
//! from the cluster assigned to it.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

/// Dense handle for an original tag, valid within one [`Tagset`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TagId(pub u32);

impl TagId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Names reserved for the sentence boundary pseudo-tags.
pub const BOS_NAME: &str = "<s>";
pub const EOS_NAME: &str = "</s>";

/// Checks that a tag name can be written to every file format of the toolkit.
///
/// Tag names may not be empty, contain whitespace or `,` (the cluster-map
/// separator), or collide with the boundary pseudo-tag names.
pub fn validate_tag_name(name: &str) -> std::result::Result<(), String> {
    if name.is_empty() {
        return Err("empty tag".into());
    }
    if name.chars().any(char::is_whitespace) {
        return Err(format!("tag {name:?} contains whitespace"));
    }
    if name.contains(',') {
        return Err(format!("tag {name:?} contains ','"));
    }
    if name == BOS_NAME || name == EOS_NAME {
        return Err(format!("tag {name:?} is reserved"));
    }
    Ok(())
}

/// Interned tag names in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tagset {
    names: Vec<String>,
    index: HashMap<String, TagId>,
}

impl Tagset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tagset = Self::new();
        for name in names {
            tagset.intern(name.as_ref());
        }
        tagset
    }

    pub fn intern(&mut self, name: &str) -> TagId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = TagId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<TagId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: TagId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = TagId> + '_ {
        (0..self.names.len() as u32).map(TagId)
    }

    /// True when `self` interns the same names at the same ids as the first
    /// `self.len()` entries of `other`.
    pub fn is_prefix_of(&self, other: &Tagset) -> bool {
        self.names.len() <= other.names.len()
            && self.names.iter().zip(&other.names).all(|(a, b)| a == b)
    }
}

/// A non-empty set of original tags acting as one label of the reduced tagset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    members: Vec<TagId>,
    name: String,
}

impl Cluster {
    /// Builds a cluster with members sorted by tag name. Duplicates are removed.
    pub fn new(mut members: Vec<TagId>, tagset: &Tagset) -> Self {
        members.sort_by(|a, b| tagset.name(*a).cmp(tagset.name(*b)));
        members.dedup();
        let name = if members.len() == 1 {
            tagset.name(members[0]).to_owned()
        } else {
            let joined: Vec<&str> = members.iter().map(|&t| tagset.name(t)).collect();
            format!("{{{}}}", joined.join(","))
        };
        Cluster { members, name }
    }

    pub fn members(&self) -> &[TagId] {
        &self.members
    }

    pub fn contains(&self, tag: TagId) -> bool {
        self.members.contains(&tag)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    /// `{A,B}` for merged clusters, the bare tag name for singletons.
    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A partition of the original tagset into clusters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterTagset {
    tagset: Tagset,
    clusters: Vec<Cluster>,
    tag_to_cluster: Vec<usize>,
}

impl ClusterTagset {
    /// One singleton cluster per original tag.
    pub fn identity(tagset: &Tagset) -> Self {
        let clusters = tagset
            .ids()
            .map(|t| Cluster::new(vec![t], tagset))
            .collect();
        ClusterTagset {
            tagset: tagset.clone(),
            clusters,
            tag_to_cluster: (0..tagset.len()).collect(),
        }
    }

    /// Builds a clustering from explicit member lists, checking that they
    /// partition `tagset`.
    pub fn from_groups(tagset: &Tagset, groups: Vec<Vec<TagId>>) -> Result<Self> {
        let mut tag_to_cluster = vec![usize::MAX; tagset.len()];
        let mut clusters = Vec::with_capacity(groups.len());
        for (idx, group) in groups.into_iter().enumerate() {
            if group.is_empty() {
                return Err(Error::NotAPartition(format!("cluster {idx} is empty")));
            }
            for &tag in &group {
                if tag.index() >= tagset.len() {
                    return Err(Error::NotAPartition(format!(
                        "tag id {} out of range",
                        tag.0
                    )));
                }
                if tag_to_cluster[tag.index()] != usize::MAX {
                    return Err(Error::NotAPartition(format!(
                        "tag {} appears more than once",
                        tagset.name(tag)
                    )));
                }
                tag_to_cluster[tag.index()] = idx;
            }
            clusters.push(Cluster::new(group, tagset));
        }
        if let Some(missing) = tag_to_cluster.iter().position(|&c| c == usize::MAX) {
            return Err(Error::NotAPartition(format!(
                "tag {} is not in any cluster",
                tagset.name(TagId(missing as u32))
            )));
        }
        Ok(ClusterTagset {
            tagset: tagset.clone(),
            clusters,
            tag_to_cluster,
        })
    }

    pub fn tagset(&self) -> &Tagset {
        &self.tagset
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, index: usize) -> &Cluster {
        &self.clusters[index]
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Number of original tags covered by the partition.
    pub fn num_tags(&self) -> usize {
        self.tag_to_cluster.len()
    }

    pub fn cluster_of(&self, tag: TagId) -> usize {
        self.tag_to_cluster[tag.index()]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.name() == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.clusters.iter().map(|c| c.name().to_owned()).collect()
    }

    /// Replaces clusters `a` and `b` with their union. The union takes the
    /// lower of the two positions; all other clusters keep their relative order.
    pub fn merge(&self, a: usize, b: usize, lexicon: &Lexicon) -> Result<ClusterTagset> {
        let len = self.clusters.len();
        for index in [a, b] {
            if index >= len {
                return Err(Error::ClusterIndex { index, len });
            }
        }
        if a == b {
            return Err(Error::SelfMerge(a));
        }
        let (keep, drop) = if a < b { (a, b) } else { (b, a) };
        let mut members = self.clusters[keep].members.clone();
        members.extend_from_slice(&self.clusters[drop].members);
        let merged = Cluster::new(members, &self.tagset);
        if let Some((word, first, second)) =
            lexicon.cross_conflict(self.clusters[keep].members(), self.clusters[drop].members())
        {
            return Err(Error::ConstraintViolation {
                cluster: merged.name,
                word: word.to_owned(),
                first: self.tagset.name(first).to_owned(),
                second: self.tagset.name(second).to_owned(),
            });
        }

        let mut clusters = self.clusters.clone();
        clusters[keep] = merged;
        clusters.remove(drop);
        let tag_to_cluster = self
            .tag_to_cluster
            .iter()
            .map(|&c| match c {
                c if c == drop => keep,
                c if c > drop => c - 1,
                c => c,
            })
            .collect();
        Ok(ClusterTagset {
            tagset: self.tagset.clone(),
            clusters,
            tag_to_cluster,
        })
    }

    /// Checks every cluster against the lexicon and reports the first violation.
    pub fn validate_admissible(&self, lexicon: &Lexicon) -> Result<()> {
        for cluster in &self.clusters {
            if let Some((word, first, second)) = lexicon.conflict_within(cluster.members()) {
                return Err(Error::ConstraintViolation {
                    cluster: cluster.name().to_owned(),
                    word: word.to_owned(),
                    first: self.tagset.name(first).to_owned(),
                    second: self.tagset.name(second).to_owned(),
                });
            }
        }
        Ok(())
    }

    /// Cluster-map file: one cluster per line, member names joined by `,`.
    pub fn to_map_string(&self) -> String {
        let mut out = String::new();
        for cluster in &self.clusters {
            let names: Vec<&str> = cluster
                .members
                .iter()
                .map(|&t| self.tagset.name(t))
                .collect();
            out.push_str(&names.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a cluster-map file against `tagset`. Every tag must appear exactly once.
    pub fn parse_map(text: &str, tagset: &Tagset) -> Result<ClusterTagset> {
        let mut groups = Vec::new();
        let mut seen: HashMap<TagId, usize> = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut group = Vec::new();
            for name in line.split(',') {
                let name = name.trim();
                let tag = tagset.get(name).ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("unknown tag {name:?}"),
                })?;
                if let Some(prev) = seen.insert(tag, lineno + 1) {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("tag {name:?} already listed on line {prev}"),
                    });
                }
                group.push(tag);
            }
            groups.push(group);
        }
        ClusterTagset::from_groups(tagset, groups)
    }
}

/// True iff no lexicon word carries two distinct tags of `candidate`.
pub fn cluster_admissible(candidate: &[TagId], lexicon: &Lexicon) -> bool {
    lexicon.conflict_within(candidate).is_none()
}

/// The unique original tag of `word` inside `cluster`.
pub fn restore_original(word: &str, cluster: &Cluster, lexicon: &Lexicon) -> Result<TagId> {
    let tags = lexicon.tags_of(word);
    if tags.is_empty() {
        return Err(Error::UnknownWord(word.to_owned()));
    }
    let mut found = tags.iter().copied().filter(|t| cluster.contains(*t));
    match (found.next(), found.next()) {
        (Some(tag), None) => Ok(tag),
        (None, _) => Err(Error::Inconsistent {
            word: word.to_owned(),
            cluster: cluster.name().to_owned(),
        }),
        (Some(first), Some(second)) => {
            let tagset = lexicon.tagset();
            Err(Error::ConstraintViolation {
                cluster: cluster.name().to_owned(),
                word: word.to_owned(),
                first: tagset.name(first).to_owned(),
                second: tagset.name(second).to_owned(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::lexicon::Casing;

    fn lexicon(text: &str) -> Lexicon {
        Lexicon::build(&Corpus::parse(text).unwrap(), Casing::Preserve)
    }

    const ADJ: &str =
        "easier\tJJR\nbigger\tJJR\neasiest\tJJT\nthe\tAT\ncliff\tNN\nCliff\tNP\ncliff\tNP\n";

    #[test]
    fn identity_has_one_singleton_per_tag() {
        let tagset = Tagset::from_names(["AT", "NN", "JJ"]);
        let c = ClusterTagset::identity(&tagset);
        assert_eq!(c.names(), vec!["AT", "NN", "JJ"]);
        assert!(ClusterTagset::identity(&Tagset::new()).is_empty());

        let big = Tagset::from_names((0..424).map(|i| format!("T{i}")));
        let c = ClusterTagset::identity(&big);
        assert_eq!(c.len(), 424);
        assert!(c.clusters().iter().all(Cluster::is_singleton));
    }

    #[test]
    fn cluster_names_are_sorted() {
        let tagset = Tagset::from_names(["JJT", "JJR"]);
        let c = Cluster::new(vec![TagId(0), TagId(1)], &tagset);
        assert_eq!(c.name(), "{JJR,JJT}");
        assert_eq!(Cluster::new(vec![TagId(0)], &tagset).name(), "JJT");
    }

    #[test]
    fn admissibility_examples() {
        let lex = lexicon(ADJ);
        let ts = lex.tagset();
        let id = |n| ts.get(n).unwrap();
        assert!(cluster_admissible(&[id("JJR"), id("JJT")], &lex));
        assert!(!cluster_admissible(&[id("NP"), id("NN")], &lex));
        assert!(cluster_admissible(&[id("NN")], &lex));
        assert!(cluster_admissible(&[], &lex));
    }

    #[test]
    fn merge_and_restore() {
        let lex = lexicon(ADJ);
        let ts = lex.tagset().clone();
        let id = ClusterTagset::identity(&ts);
        let jjr = id.position("JJR").unwrap();
        let jjt = id.position("JJT").unwrap();
        let merged = id.merge(jjr, jjt, &lex).unwrap();
        assert_eq!(merged.len(), id.len() - 1);
        let c = merged.position("{JJR,JJT}").unwrap();
        assert_eq!(
            merged
                .clusters()
                .iter()
                .filter(|c| c.is_singleton())
                .count(),
            id.len() - 2
        );
        let restored = restore_original("easier", merged.cluster(c), &lex).unwrap();
        assert_eq!(ts.name(restored), "JJR");
        let restored = restore_original("easiest", merged.cluster(c), &lex).unwrap();
        assert_eq!(ts.name(restored), "JJT");
        // the input is untouched
        assert_eq!(id.len(), ts.len());

        assert!(matches!(id.merge(jjr, jjr, &lex), Err(Error::SelfMerge(_))));
        let nn = id.position("NN").unwrap();
        let np = id.position("NP").unwrap();
        match id.merge(nn, np, &lex) {
            Err(Error::ConstraintViolation { word, .. }) => assert_eq!(word, "cliff"),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn clusters_grow_across_merges() {
        let lex = lexicon("a\tX\nb\tY\nc\tZ\n");
        let id = ClusterTagset::identity(lex.tagset());
        let xy = id.merge(0, 1, &lex).unwrap();
        let xyz = xy
            .merge(
                xy.position("{X,Y}").unwrap(),
                xy.position("Z").unwrap(),
                &lex,
            )
            .unwrap();
        assert_eq!(xyz.names(), vec!["{X,Y,Z}"]);
        for t in lex.tagset().ids() {
            assert_eq!(xyz.cluster_of(t), 0);
        }
    }

    #[test]
    fn restore_error_branches() {
        let lex = lexicon(ADJ);
        let ts = lex.tagset();
        let nn_np = Cluster::new(vec![ts.get("NN").unwrap(), ts.get("NP").unwrap()], ts);
        assert!(matches!(
            restore_original("cliff", &nn_np, &lex),
            Err(Error::ConstraintViolation { .. })
        ));
        assert!(matches!(
            restore_original("unseen", &nn_np, &lex),
            Err(Error::UnknownWord(_))
        ));
        assert!(matches!(
            restore_original("the", &nn_np, &lex),
            Err(Error::Inconsistent { .. })
        ));
        let nn = Cluster::new(vec![ts.get("NN").unwrap()], ts);
        assert_eq!(
            restore_original("cliff", &nn, &lex).unwrap(),
            ts.get("NN").unwrap()
        );
    }

    #[test]
    fn cluster_map_round_trip_and_validation() {
        let lex = lexicon(ADJ);
        let ts = lex.tagset();
        let id = ClusterTagset::identity(ts);
        let merged = id
            .merge(
                id.position("JJR").unwrap(),
                id.position("JJT").unwrap(),
                &lex,
            )
            .unwrap();
        let text = merged.to_map_string();
        assert!(text.contains("JJR,JJT\n"));
        let back = ClusterTagset::parse_map(&format!("# map\n{text}"), ts).unwrap();
        assert_eq!(back, merged);

        assert!(ClusterTagset::parse_map("JJR,JJT\nAT\nNN\n", ts).is_err());
        assert!(ClusterTagset::parse_map("JJR,JJT,JJR\nAT\nNN\nNP\n", ts).is_err());
        assert!(ClusterTagset::parse_map("FOO\n", ts).is_err());
        let bad = ClusterTagset::parse_map("JJR\nJJT\nAT\nNN,NP\n", ts).unwrap();
        assert!(bad.validate_admissible(&lex).is_err());
    }

    #[test]
    fn tag_name_rules() {
        assert!(validate_tag_name("NN").is_ok());
        assert!(validate_tag_name("II21").is_ok());
        assert!(validate_tag_name("N N").is_err());
        assert!(validate_tag_name("A,B").is_err());
        assert!(validate_tag_name("<s>").is_err());
        assert!(validate_tag_name("").is_err());
    }
}
