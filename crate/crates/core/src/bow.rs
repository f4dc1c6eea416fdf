//! Seed-hashtag co-occurrence vocabularies and TF-IDF user features.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::Dimension;
use crate::corpus::{normalize_hashtag, UserAggregate};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Number of co-occurring hashtags kept per seed group.
pub const TOP_K: usize = 100;

/// Seed hashtags for the two poles of a dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashtagSeeds {
    pub pos: Vec<String>,
    pub neg: Vec<String>,
}

impl HashtagSeeds {
    pub fn new(pos: &[&str], neg: &[&str]) -> Self {
        let norm = |v: &[&str]| v.iter().filter_map(|s| normalize_hashtag(s)).collect();
        Self {
            pos: norm(pos),
            neg: norm(neg),
        }
    }

    /// Seeds used in the original COVID-19 study.
    pub fn defaults(dim: Dimension) -> Self {
        match dim {
            Dimension::Science => Self::new(&["stayhome"], &["plandemic"]),
            Dimension::Political => Self::new(&["chinavirus"], &["trumpvirus"]),
            Dimension::Moderacy => Self::new(&["pandemic", "lockdown"], &["trumpvirus", "chinavirus"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagVocab {
    pub dimension: Dimension,
    pub seeds: HashtagSeeds,
    /// Seeds first, then each group's top-k co-occurring tags, deduplicated.
    pub vocab: Vec<String>,
    /// Co-occurrence counts backing each group's ranking.
    pub pos_ranking: Vec<(String, u64)>,
    pub neg_ranking: Vec<(String, u64)>,
}

impl HashtagVocab {
    pub fn index(&self) -> HashMap<&str, usize> {
        self.vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }
}

/// Counts, per hashtag, the tweets in which it appears together with at
/// least one seed of the group. Seeds themselves are never counted.
pub fn cooccurrence_counts<'a>(
    tweets: impl IntoIterator<Item = &'a [String]>,
    group: &[String],
    all_seeds: &BTreeSet<&str>,
) -> BTreeMap<String, u64> {
    let group: BTreeSet<&str> = group.iter().map(String::as_str).collect();
    let mut counts = BTreeMap::new();
    for tags in tweets {
        let distinct: BTreeSet<&str> = tags.iter().map(String::as_str).collect();
        if distinct.is_disjoint(&group) {
            continue;
        }
        for tag in distinct {
            if !all_seeds.contains(tag) {
                *counts.entry(tag.to_owned()).or_default() += 1;
            }
        }
    }
    counts
}

/// Count descending, then tag ascending; truncated to `k`.
pub fn rank_top_k(counts: BTreeMap<String, u64>, k: usize) -> Vec<(String, u64)> {
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Builds a dimension's vocabulary from per-tweet hashtag lists.
pub fn cooccur_vocab<'a>(
    tweets: impl IntoIterator<Item = &'a [String]> + Clone,
    dimension: Dimension,
    seeds: &HashtagSeeds,
    k: usize,
) -> Result<HashtagVocab> {
    if seeds.pos.is_empty() || seeds.neg.is_empty() {
        return Err(Error::invalid("each seed group needs at least one hashtag"));
    }
    let all_seeds: BTreeSet<&str> = seeds.pos.iter().chain(&seeds.neg).map(String::as_str).collect();
    let pos_ranking = rank_top_k(cooccurrence_counts(tweets.clone(), &seeds.pos, &all_seeds), k);
    let neg_ranking = rank_top_k(cooccurrence_counts(tweets, &seeds.neg, &all_seeds), k);
    for (name, ranking) in [("positive", &pos_ranking), ("negative", &neg_ranking)] {
        if ranking.len() < k {
            log::warn!(
                "{dimension}: {name} seed group yields {} co-occurring hashtags (< {k})",
                ranking.len()
            );
        }
    }

    let mut seen = BTreeSet::new();
    let vocab = seeds
        .pos
        .iter()
        .chain(&seeds.neg)
        .chain(pos_ranking.iter().map(|(t, _)| t))
        .chain(neg_ranking.iter().map(|(t, _)| t))
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect();
    Ok(HashtagVocab {
        dimension,
        seeds: seeds.clone(),
        vocab,
        pos_ranking,
        neg_ranking,
    })
}

/// Sparse row: strictly increasing vocabulary indices with positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SparseFeatures<T = f64> {
    pub user_id: String,
    pub indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> SparseFeatures<T> {
    pub fn to_dense(&self, dim: usize) -> Vec<T> {
        let mut v = vec![T::zero(); dim];
        for (&i, &x) in self.indices.iter().zip(&self.values) {
            v[i] = x;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IdfTable<T = f64> {
    /// Users with at least one vocabulary hashtag.
    pub n_docs: usize,
    pub df: Vec<usize>,
    pub idf: Vec<T>,
}

/// Smoothed inverse document frequency `ln((1+N)/(1+df)) + 1`.
pub fn smoothed_idf<T: Real>(n_docs: usize, df: usize) -> T {
    (T::of_usize(1 + n_docs) / T::of_usize(1 + df)).ln() + T::one()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TfidfOutput<T = f64> {
    pub features: Vec<SparseFeatures<T>>,
    pub idf: IdfTable<T>,
    /// Users skipped because none of their hashtags are in the vocabulary.
    pub excluded: usize,
}

fn term_counts(agg: &UserAggregate, index: &HashMap<&str, usize>) -> BTreeMap<usize, u32> {
    agg.hashtag_counts
        .iter()
        .filter_map(|(tag, &c)| index.get(tag.as_str()).map(|&i| (i, c)))
        .collect()
}

/// Raw-count TF times smoothed IDF over the users who use the vocabulary.
pub fn tfidf_features<'a, T: Real>(
    aggs: impl IntoIterator<Item = &'a UserAggregate>,
    vocab: &HashtagVocab,
) -> Result<TfidfOutput<T>> {
    if vocab.is_empty() {
        return Err(Error::invalid("empty hashtag vocabulary"));
    }
    let index = vocab.index();
    let mut rows = Vec::new();
    let mut excluded = 0;
    for agg in aggs {
        let counts = term_counts(agg, &index);
        if counts.is_empty() {
            excluded += 1;
        } else {
            rows.push((agg.user_id.clone(), counts));
        }
    }
    let mut df = vec![0usize; vocab.len()];
    for (_, counts) in &rows {
        for &i in counts.keys() {
            df[i] += 1;
        }
    }
    let n_docs = rows.len();
    let idf: Vec<T> = df.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
    let table = IdfTable { n_docs, df, idf };
    let features = rows
        .into_iter()
        .map(|(user_id, counts)| apply_idf(user_id, &counts, &table))
        .collect();
    Ok(TfidfOutput {
        features,
        idf: table,
        excluded,
    })
}

fn apply_idf<T: Real>(user_id: String, counts: &BTreeMap<usize, u32>, table: &IdfTable<T>) -> SparseFeatures<T> {
    let (indices, values) = counts
        .iter()
        .map(|(&i, &c)| (i, T::of_usize(c as usize) * table.idf[i]))
        .unzip();
    SparseFeatures {
        user_id,
        indices,
        values,
    }
}

/// Featurizes a user with a previously fitted IDF table; `None` when the
/// user has no vocabulary hashtag.
pub fn transform<T: Real>(
    agg: &UserAggregate,
    vocab: &HashtagVocab,
    table: &IdfTable<T>,
) -> Option<SparseFeatures<T>> {
    let counts = term_counts(agg, &vocab.index());
    (!counts.is_empty()).then(|| apply_idf(agg.user_id.clone(), &counts, table))
}

/// Vocabulary plus IDF, persisted so inference is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BowArtifact<T = f64> {
    pub vocab: HashtagVocab,
    pub idf: IdfTable<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tweets(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn user(id: &str, tags: &[(&str, u32)]) -> UserAggregate {
        UserAggregate {
            user_id: id.into(),
            hashtag_counts: tags.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            ..Default::default()
        }
    }

    fn vocab_of(tags: &[&str]) -> HashtagVocab {
        HashtagVocab {
            dimension: Dimension::Science,
            seeds: HashtagSeeds::new(&["s"], &["t"]),
            vocab: tags.iter().map(|s| s.to_string()).collect(),
            pos_ranking: vec![],
            neg_ranking: vec![],
        }
    }

    #[test]
    fn ranks_by_cooccurrence() {
        let mut raw: Vec<&[&str]> = vec![&["stayhome", "maskup"]; 10];
        raw.push(&["stayhome", "foo"]);
        raw.push(&["plandemic", "hoax"]);
        let t = tweets(&raw);
        let v = cooccur_vocab(t.iter().map(Vec::as_slice), Dimension::Science, &HashtagSeeds::defaults(Dimension::Science), 100).unwrap();
        assert_eq!(v.pos_ranking, vec![("maskup".to_string(), 10), ("foo".to_string(), 1)]);
        assert_eq!(v.vocab, vec!["stayhome", "plandemic", "maskup", "foo", "hoax"]);
    }

    #[test]
    fn seed_only_tweets_give_nothing() {
        let t = tweets(&[&["stayhome"], &["stayhome", "plandemic"]]);
        let v = cooccur_vocab(t.iter().map(Vec::as_slice), Dimension::Science, &HashtagSeeds::defaults(Dimension::Science), 5).unwrap();
        assert!(v.pos_ranking.is_empty());
        assert!(v.neg_ranking.is_empty());
    }

    #[test]
    fn idf_reference_values() {
        let users = [user("u1", &[("a", 1), ("b", 2)]), user("u2", &[("a", 3)])];
        let out: TfidfOutput = tfidf_features(&users, &vocab_of(&["a", "b"])).unwrap();
        assert_relative_eq!(out.idf.idf[0], 1.0);
        assert_relative_eq!(out.idf.idf[1], (1.5f64).ln() + 1.0);
        assert!((out.idf.idf[1] - 1.405).abs() < 1e-3);
        assert_eq!(out.features[0].indices, vec![0, 1]);
        assert_relative_eq!(out.features[0].values[1], 2.0 * out.idf.idf[1]);
    }

    #[test]
    fn users_without_vocab_tags_are_excluded() {
        let users = [user("u1", &[("a", 1)]), user("u2", &[("zzz", 4)]), user("u3", &[])];
        let out: TfidfOutput = tfidf_features(&users, &vocab_of(&["a"])).unwrap();
        assert_eq!(out.features.len(), 1);
        assert_eq!(out.excluded, 2);
        assert_eq!(out.idf.idf, vec![1.0]);
        assert!(tfidf_features::<f64>(&users, &vocab_of(&[])).is_err());
    }

    #[test]
    fn transform_matches_fit() {
        let users = [user("u1", &[("a", 1), ("b", 2)]), user("u2", &[("a", 3)])];
        let vocab = vocab_of(&["a", "b"]);
        let out: TfidfOutput = tfidf_features(&users, &vocab).unwrap();
        assert_eq!(transform(&users[0], &vocab, &out.idf).unwrap(), out.features[0]);
        assert_eq!(transform(&user("x", &[("q", 1)]), &vocab, &out.idf), None);
    }

    proptest! {
        #[test]
        fn doubling_counts_doubles_tf(counts in prop::collection::vec(prop::collection::vec(0u32..4, 4), 1..8)) {
            let vocab = vocab_of(&["a", "b", "c", "d"]);
            let tags = ["a", "b", "c", "d"];
            let users: Vec<_> = counts.iter().enumerate().map(|(i, row)| {
                let pairs: Vec<(&str, u32)> = tags.iter().zip(row).filter(|(_, &c)| c > 0).map(|(t, &c)| (*t, c)).collect();
                user(&format!("u{i}"), &pairs)
            }).collect();
            let doubled: Vec<_> = users.iter().map(|u| {
                let mut d = u.clone();
                d.hashtag_counts.values_mut().for_each(|c| *c *= 2);
                d
            }).collect();
            let a: TfidfOutput = tfidf_features(&users, &vocab).unwrap();
            let b: TfidfOutput = tfidf_features(&doubled, &vocab).unwrap();
            prop_assert_eq!(&a.idf, &b.idf);
            for (fa, fb) in a.features.iter().zip(&b.features) {
                prop_assert!(fa.values.iter().all(|&v| v > 0.0));
                prop_assert!(fa.indices.windows(2).all(|w| w[0] < w[1]));
                for (va, vb) in fa.values.iter().zip(&fb.values) {
                    prop_assert!((2.0 * va - vb).abs() < 1e-12);
                }
            }
        }
    }
}
