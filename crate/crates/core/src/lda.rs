//! Hashtag topic model: LDA fitted by collapsed Gibbs sampling.
//!
//! Each user's hashtags form one document. Topic-word distributions are
//! averaged over post-burn-in sweeps; per-user topic affinities are then
//! inferred with those distributions held fixed.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::UserAggregate;
use crate::error::{Error, Result};

pub const MIN_USERS: usize = 10;
pub const MAX_FRAC: f64 = 0.75;
pub const DEFAULT_TOPICS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashtagDocCorpus {
    /// Hashtags kept after pruning, sorted.
    pub vocab: Vec<String>,
    /// Token ids per kept document.
    pub docs: Vec<Vec<u32>>,
    /// Owner of each kept document.
    pub users: Vec<String>,
    /// Users whose documents were empty after pruning.
    pub dropped: usize,
}

impl HashtagDocCorpus {
    pub fn vocab_index(&self) -> HashMap<&str, u32> {
        self.vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Corpus frequency of every vocabulary entry.
    pub fn frequencies(&self) -> Vec<u64> {
        let mut freq = vec![0u64; self.vocab.len()];
        for doc in &self.docs {
            for &w in doc {
                freq[w as usize] += 1;
            }
        }
        freq
    }
}

/// Expands a hashtag multiset into token ids, dropping out-of-vocabulary tags.
pub fn doc_tokens(counts: &BTreeMap<String, u32>, index: &HashMap<&str, u32>) -> Vec<u32> {
    let mut tokens: Vec<u32> = counts
        .iter()
        .filter_map(|(t, &c)| index.get(t.as_str()).map(|&id| (id, c)))
        .flat_map(|(id, c)| std::iter::repeat_n(id, c as usize))
        .collect();
    tokens.sort_unstable();
    tokens
}

/// One document per user over the hashtags used by at least `min_users`
/// and at most `max_frac` of the users that use any hashtag.
pub fn build_hashtag_corpus<'a>(
    aggs: impl IntoIterator<Item = &'a UserAggregate>,
    min_users: usize,
    max_frac: f64,
) -> Result<HashtagDocCorpus> {
    let aggs: Vec<&UserAggregate> = aggs.into_iter().filter(|a| !a.hashtag_counts.is_empty()).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &aggs {
        for tag in a.hashtag_counts.keys() {
            *df.entry(tag.as_str()).or_default() += 1;
        }
    }
    let n_users = aggs.len() as f64;
    let vocab: Vec<String> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_users && d as f64 <= max_frac * n_users)
        .map(|(t, _)| t.to_owned())
        .collect();
    if vocab.is_empty() {
        return Err(Error::Insufficient("no hashtag survives vocabulary pruning".into()));
    }
    let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i as u32)).collect();
    let mut docs = Vec::new();
    let mut users = Vec::new();
    let mut dropped = 0;
    for a in aggs {
        let tokens = doc_tokens(&a.hashtag_counts, &index);
        if tokens.is_empty() {
            dropped += 1;
        } else {
            docs.push(tokens);
            users.push(a.user_id.clone());
        }
    }
    Ok(HashtagDocCorpus {
        vocab,
        docs,
        users,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub rng_seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOPICS,
            alpha: None,
            beta: 0.01,
            sweeps: 1000,
            burn_in: 200,
            rng_seed: 7,
        }
    }
}

impl LdaParams {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Collapsed Gibbs sampler state.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    docs: &'a [Vec<u32>],
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    z: Vec<Vec<u16>>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(docs: &'a [Vec<u32>], vocab_size: usize, params: &LdaParams) -> Result<Self> {
        if params.k < 2 {
            return Err(Error::invalid(format!("need at least 2 topics, got {}", params.k)));
        }
        if params.k > u16::MAX as usize {
            return Err(Error::invalid("too many topics"));
        }
        if docs.is_empty() || docs.iter().all(Vec::is_empty) {
            return Err(Error::Insufficient("empty corpus".into()));
        }
        let k = params.k;
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        let mut s = Self {
            docs,
            k,
            v: vocab_size,
            alpha: params.alpha(),
            beta: params.beta,
            z: Vec::with_capacity(docs.len()),
            doc_topic: vec![0; docs.len() * k],
            topic_word: vec![0; k * vocab_size],
            topic_total: vec![0; k],
            rng: ChaCha8Rng::seed_from_u64(0),
            weights: vec![0.0; k],
        };
        for (d, doc) in docs.iter().enumerate() {
            let mut zd = Vec::with_capacity(doc.len());
            for &w in doc {
                if w as usize >= vocab_size {
                    return Err(Error::invalid(format!("token id {w} outside vocabulary of {vocab_size}")));
                }
                let t = rng.gen_range(0..k);
                zd.push(t as u16);
                s.doc_topic[d * k + t] += 1;
                s.topic_word[t * vocab_size + w as usize] += 1;
                s.topic_total[t] += 1;
            }
            s.z.push(zd);
        }
        s.rng = rng;
        Ok(s)
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        for (d, doc) in self.docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                self.doc_topic[d * k + old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (f64::from(self.doc_topic[d * k + t]) + self.alpha)
                        * (f64::from(self.topic_word[t * v + w]) + self.beta)
                        / (f64::from(self.topic_total[t]) + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.weights.partition_point(|&c| c <= u).min(k - 1);

                self.z[d][i] = new as u16;
                self.doc_topic[d * k + new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    /// Current point estimate `(n_kw + β) / (n_k + Vβ)`.
    pub fn phi(&self) -> Vec<Vec<f64>> {
        let vbeta = self.v as f64 * self.beta;
        (0..self.k)
            .map(|t| {
                let denom = f64::from(self.topic_total[t]) + vbeta;
                (0..self.v)
                    .map(|w| (f64::from(self.topic_word[t * self.v + w]) + self.beta) / denom)
                    .collect()
            })
            .collect()
    }

    pub fn topic_word_count(&self, topic: usize, word: usize) -> u32 {
        self.topic_word[topic * self.v + word]
    }

    /// Checks that topic counts account for every token exactly once.
    pub fn counts_conserved(&self, frequencies: &[u64]) -> bool {
        let words_ok = (0..self.v).all(|w| {
            let s: u64 = (0..self.k).map(|t| u64::from(self.topic_word_count(t, w))).sum();
            s == frequencies[w]
        });
        let totals_ok = (0..self.k).all(|t| {
            let s: u64 = (0..self.v).map(|w| u64::from(self.topic_word_count(t, w))).sum();
            s == u64::from(self.topic_total[t])
        });
        let docs_ok = self.docs.iter().enumerate().all(|(d, doc)| {
            let s: u64 = (0..self.k).map(|t| u64::from(self.doc_topic[d * self.k + t])).sum();
            s == doc.len() as u64
        });
        words_ok && totals_ok && docs_ok
    }

    /// Mean per-token log-likelihood under the current point estimates.
    pub fn log_likelihood(&self) -> f64 {
        let phi = self.phi();
        let kalpha = self.k as f64 * self.alpha;
        let mut ll = 0.0;
        let mut n = 0usize;
        for (d, doc) in self.docs.iter().enumerate() {
            let len = doc.len() as f64;
            for &w in doc {
                let p: f64 = (0..self.k)
                    .map(|t| {
                        (f64::from(self.doc_topic[d * self.k + t]) + self.alpha) / (len + kalpha)
                            * phi[t][w as usize]
                    })
                    .sum();
                ll += p.ln();
                n += 1;
            }
        }
        ll / n.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    /// `k × |vocab|`, rows sum to one.
    pub phi: Vec<Vec<f64>>,
    pub params: LdaParams,
    /// (sweep, mean per-token log-likelihood)
    pub log: Vec<(usize, f64)>,
}

const LOG_EVERY: usize = 50;

/// Fits LDA, calling `observe` after every sweep.
pub fn fit_lda_observed(
    corpus: &HashtagDocCorpus,
    params: &LdaParams,
    mut observe: impl FnMut(usize, &GibbsSampler<'_>),
) -> Result<TopicModel> {
    let mut sampler = GibbsSampler::new(&corpus.docs, corpus.vocab.len(), params)?;
    let v = corpus.vocab.len();
    let mut acc = vec![vec![0.0; v]; params.k];
    let mut samples = 0usize;
    let mut log = Vec::new();
    for sweep in 1..=params.sweeps {
        sampler.sweep();
        observe(sweep, &sampler);
        if sweep > params.burn_in {
            for (row, cur) in acc.iter_mut().zip(sampler.phi()) {
                row.iter_mut().zip(cur).for_each(|(a, c)| *a += c);
            }
            samples += 1;
        }
        if sweep % LOG_EVERY == 0 || sweep == params.sweeps {
            log.push((sweep, sampler.log_likelihood()));
        }
    }
    let phi = if samples == 0 {
        sampler.phi()
    } else {
        acc.into_iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.into_iter().map(|x| x / s).collect()
            })
            .collect()
    };
    Ok(TopicModel {
        k: params.k,
        alpha: params.alpha(),
        beta: params.beta,
        vocab: corpus.vocab.clone(),
        phi,
        params: *params,
        log,
    })
}

pub fn fit_lda(corpus: &HashtagDocCorpus, params: &LdaParams) -> Result<TopicModel> {
    fit_lda_observed(corpus, params, |_, _| {})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityVector {
    pub user_id: String,
    pub theta: Vec<f64>,
    /// Set when no token was in the vocabulary and theta is the uniform prior.
    pub empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferParams {
    pub sweeps: usize,
    pub burn_in: usize,
    pub rng_seed: u64,
}

impl Default for InferParams {
    fn default() -> Self {
        Self {
            sweeps: 60,
            burn_in: 20,
            rng_seed: 11,
        }
    }
}

impl TopicModel {
    pub fn vocab_index(&self) -> HashMap<&str, u32> {
        self.vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect()
    }

    /// Indices of the `n` most probable words of a topic.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.vocab.len()).collect();
        idx.sort_by(|&a, &b| {
            self.phi[topic][b]
                .partial_cmp(&self.phi[topic][a])
                .unwrap()
                .then(a.cmp(&b))
        });
        idx.truncate(n);
        idx
    }
}

/// Topic affinity of one document under fixed topic-word distributions.
///
/// Runs Gibbs sampling over the document's assignments only and averages
/// `(n_k + α) / (N + Kα)` over post-burn-in sweeps. Tokens outside the
/// model vocabulary are ignored; an empty document gets the uniform vector.
pub fn infer_affinity(model: &TopicModel, user_id: &str, tokens: &[u32], params: &InferParams) -> AffinityVector {
    let k = model.k;
    let tokens: Vec<usize> = tokens
        .iter()
        .map(|&w| w as usize)
        .filter(|&w| w < model.vocab.len())
        .collect();
    if tokens.is_empty() {
        return AffinityVector {
            user_id: user_id.to_owned(),
            theta: vec![1.0 / k as f64; k],
            empty: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut counts = vec![0u32; k];
    let mut z: Vec<usize> = tokens
        .iter()
        .map(|_| {
            let t = rng.gen_range(0..k);
            counts[t] += 1;
            t
        })
        .collect();
    let n = tokens.len() as f64;
    let denom = n + k as f64 * model.alpha;
    let mut acc = vec![0.0; k];
    let mut samples = 0usize;
    let mut weights = vec![0.0; k];
    let sweeps = params.sweeps.max(params.burn_in + 1);
    for sweep in 0..sweeps {
        for (i, &w) in tokens.iter().enumerate() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (f64::from(counts[t]) + model.alpha) * model.phi[t][w];
                weights[t] = total;
            }
            let u = rng.gen::<f64>() * total;
            let t = weights.partition_point(|&c| c <= u).min(k - 1);
            z[i] = t;
            counts[t] += 1;
        }
        if sweep >= params.burn_in {
            for t in 0..k {
                acc[t] += (f64::from(counts[t]) + model.alpha) / denom;
            }
            samples += 1;
        }
    }
    let mut theta: Vec<f64> = acc.into_iter().map(|a| a / samples as f64).collect();
    // renormalize away accumulated rounding
    let s: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= s);
    AffinityVector {
        user_id: user_id.to_owned(),
        theta,
        empty: false,
    }
}

/// Affinity vectors for every user, in input order.
pub fn affinity_features<'a>(
    model: &TopicModel,
    aggs: impl IntoIterator<Item = &'a UserAggregate>,
    params: &InferParams,
) -> Vec<AffinityVector> {
    use rayon::prelude::*;
    let index = model.vocab_index();
    let docs: Vec<(&str, Vec<u32>)> = aggs
        .into_iter()
        .map(|a| (a.user_id.as_str(), doc_tokens(&a.hashtag_counts, &index)))
        .collect();
    docs.par_iter()
        .enumerate()
        .map(|(i, (user, tokens))| {
            let p = InferParams {
                rng_seed: params.rng_seed.wrapping_add(i as u64),
                ..*params
            };
            infer_affinity(model, user, tokens, &p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// UMass coherence of one ranked word list.
///
/// Mean over pairs `(w_i, w_j)`, `j` ranked above `i`, of
/// `ln((D(w_i, w_j) + 1) / D(w_j))` with `D` counting documents. Pairs whose
/// higher-ranked word never occurs are skipped.
pub fn umass(words: &[usize], docs: &[Vec<u32>]) -> f64 {
    let sets: Vec<std::collections::HashSet<u32>> =
        docs.iter().map(|d| d.iter().copied().collect()).collect();
    let df = |w: usize| sets.iter().filter(|s| s.contains(&(w as u32))).count();
    let co = |a: usize, b: usize| {
        sets.iter()
            .filter(|s| s.contains(&(a as u32)) && s.contains(&(b as u32)))
            .count()
    };
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 1..words.len() {
        for j in 0..i {
            let dj = df(words[j]);
            if dj == 0 {
                continue;
            }
            total += ((co(words[i], words[j]) + 1) as f64 / dj as f64).ln();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

pub fn coherence(model: &TopicModel, corpus: &HashtagDocCorpus, top_n: usize) -> Coherence {
    let per_topic: Vec<f64> = (0..model.k)
        .map(|t| umass(&model.top_words(t, top_n), &corpus.docs))
        .collect();
    let mean = per_topic.iter().sum::<f64>() / per_topic.len().max(1) as f64;
    Coherence { per_topic, mean }
}

/// Fits one model per candidate topic count and reports mean coherence.
pub fn select_k(
    corpus: &HashtagDocCorpus,
    candidates: &[usize],
    params: &LdaParams,
    top_n: usize,
) -> Result<Vec<(usize, f64)>> {
    use rayon::prelude::*;
    candidates
        .par_iter()
        .map(|&k| {
            let model = fit_lda(corpus, &LdaParams { k, ..*params })?;
            Ok((k, coherence(&model, corpus, top_n).mean))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn user(id: &str, tags: &[(&str, u32)]) -> UserAggregate {
        UserAggregate {
            user_id: id.into(),
            hashtag_counts: tags.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            ..Default::default()
        }
    }

    fn corpus(docs: Vec<Vec<u32>>, v: usize) -> HashtagDocCorpus {
        HashtagDocCorpus {
            vocab: (0..v).map(|i| format!("w{i}")).collect(),
            users: (0..docs.len()).map(|i| format!("u{i}")).collect(),
            docs,
            dropped: 0,
        }
    }

    fn model_with_phi(phi: Vec<Vec<f64>>) -> TopicModel {
        let v = phi[0].len();
        TopicModel {
            k: phi.len(),
            alpha: 0.1,
            beta: 0.01,
            vocab: (0..v).map(|i| format!("w{i}")).collect(),
            phi,
            params: LdaParams::default(),
            log: vec![],
        }
    }

    #[test]
    fn pruning_thresholds() {
        // 20 users: "common" used by all 20 (100%), "mid" by 10, "rare" by 9
        let users: Vec<_> = (0..20)
            .map(|i| {
                let mut tags = vec![("common", 1)];
                if i < 10 {
                    tags.push(("mid", 2));
                }
                if i >= 11 {
                    tags.push(("rare", 1));
                }
                user(&format!("u{i:02}"), &tags)
            })
            .collect();
        let c = build_hashtag_corpus(&users, 10, 0.75).unwrap();
        assert_eq!(c.vocab, vec!["mid"]);
        assert_eq!(c.docs.len(), 10);
        assert_eq!(c.dropped, 10);
        assert_eq!(c.docs[0], vec![0, 0]);

        let none = build_hashtag_corpus(&users[..3], 10, 0.75);
        assert!(none.is_err());
    }

    #[test]
    fn too_few_topics_rejected() {
        let c = corpus(vec![vec![0, 1]], 2);
        assert!(fit_lda(&c, &LdaParams { k: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn single_token_corpus_concentrates() {
        let c = corpus(vec![vec![0; 30]; 5], 1);
        let m = fit_lda(&c, &LdaParams { k: 2, sweeps: 20, burn_in: 5, ..Default::default() }).unwrap();
        for row in &m.phi {
            assert_relative_eq!(row[0], 1.0);
        }
    }

    #[test]
    fn phi_rows_normalized_and_deterministic() {
        let docs: Vec<Vec<u32>> = (0..40).map(|d| (0..10).map(|i| ((d * 3 + i * 7) % 12) as u32).collect()).collect();
        let c = corpus(docs, 12);
        let p = LdaParams { k: 3, sweeps: 60, burn_in: 20, rng_seed: 5, ..Default::default() };
        let a = fit_lda(&c, &p).unwrap();
        let b = fit_lda(&c, &p).unwrap();
        assert_eq!(a.phi, b.phi);
        for row in &a.phi {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
        let freq = c.frequencies();
        fit_lda_observed(&c, &p, |_, s| assert!(s.counts_conserved(&freq))).unwrap();
    }

    #[test]
    fn empty_doc_gets_uniform_affinity() {
        let m = model_with_phi(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]]);
        let a = infer_affinity(&m, "u", &[], &InferParams::default());
        assert!(a.empty);
        assert_eq!(a.theta, vec![0.25; 4]);
    }

    #[test]
    fn exclusive_tokens_pick_their_topic() {
        let m = model_with_phi(vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]]);
        let a = infer_affinity(&m, "u", &[2, 3, 3, 2, 2], &InferParams::default());
        assert!(a.theta[1] > a.theta[0]);
        assert!((a.theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // tokens outside the vocabulary are ignored
        let b = infer_affinity(&m, "u", &[0, 99], &InferParams::default());
        assert!(b.theta[0] > b.theta[1]);
    }

    #[test]
    fn umass_reference_cases() {
        // w0 and w1 always together in 4 docs
        let docs = vec![vec![0, 1], vec![0, 1], vec![0, 1, 2], vec![0, 1], vec![3]];
        assert_relative_eq!(umass(&[0, 1], &docs), (5.0f64 / 4.0).ln());
        // never co-occurring, D(w_j) = 100
        let mut docs: Vec<Vec<u32>> = vec![vec![0]; 100];
        docs.push(vec![1]);
        assert_relative_eq!(umass(&[0, 1], &docs), (1.0f64 / 100.0).ln());
    }

    #[test]
    fn coherence_invariant_under_topic_permutation() {
        let docs = vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3], vec![0, 1, 2]];
        let c = corpus(docs, 4);
        let a = model_with_phi(vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.1, 0.2, 0.3, 0.4]]);
        let b = model_with_phi(vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1]]);
        let (ca, cb) = (coherence(&a, &c, 3), coherence(&b, &c, 3));
        let mut x = ca.per_topic.clone();
        let mut y = cb.per_topic.clone();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        assert_eq!(x, y);
        assert_eq!(ca.mean, cb.mean);
    }
}
