//! Retweet network and seed-clamped label propagation.
//!
//! An edge `a → b` means user `a` retweeted user `b`; its weight is the
//! number of such retweets. Propagation runs asynchronous sweeps in a
//! shuffled node order, with seed labels clamped throughout.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Dimension, Pole};
use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::model::{stratified_folds, Confusion, EvalReport};
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    ids: Vec<String>,
    edges: Vec<(u32, u32, u32)>,
}

/// Weighted simple digraph over users. Node indices follow sorted user id
/// order, so construction is independent of input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GraphFile", into = "GraphFile")]
pub struct RetweetGraph {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    out: Vec<Vec<(u32, u32)>>,
    inc: Vec<Vec<(u32, u32)>>,
}

impl From<GraphFile> for RetweetGraph {
    fn from(f: GraphFile) -> Self {
        Self::from_indexed(f.ids, f.edges)
    }
}

impl From<RetweetGraph> for GraphFile {
    fn from(g: RetweetGraph) -> Self {
        let edges = g.edges().collect();
        GraphFile { ids: g.ids, edges }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub retweets: u64,
    pub max_in_degree: usize,
    pub max_out_degree: usize,
}

impl RetweetGraph {
    fn from_indexed(ids: Vec<String>, edges: Vec<(u32, u32, u32)>) -> Self {
        let n = ids.len();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for (s, d, w) in edges {
            out[s as usize].push((d, w));
            inc[d as usize].push((s, w));
        }
        for list in out.iter_mut().chain(inc.iter_mut()) {
            list.sort_unstable();
        }
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Self {
            ids,
            index,
            out,
            inc,
        }
    }

    /// Collapses weighted (retweeter, retweeted) pairs; self-loops are dropped.
    pub fn from_weighted<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str, u32)>) -> Self {
        let mut weights: BTreeMap<(&str, &str), u32> = BTreeMap::new();
        for (src, dst, w) in pairs {
            if src != dst && w > 0 {
                *weights.entry((src, dst)).or_default() += w;
            }
        }
        let mut ids: Vec<String> = weights
            .keys()
            .flat_map(|(s, d)| [s.to_string(), d.to_string()])
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let position: HashMap<&str, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i as u32))
            .collect();
        let edges = weights
            .into_iter()
            .map(|((s, d), w)| (position[s], position[d], w))
            .collect();
        Self::from_indexed(ids, edges)
    }

    pub fn from_retweets<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self::from_weighted(pairs.into_iter().map(|(s, d)| (s, d, 1)))
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn node(&self, user: &str) -> Option<u32> {
        self.index.get(user).copied()
    }

    pub fn user(&self, node: u32) -> &str {
        &self.ids[node as usize]
    }

    pub fn users(&self) -> &[String] {
        &self.ids
    }

    pub fn weight(&self, src: &str, dst: &str) -> Option<u32> {
        let (s, d) = (self.node(src)?, self.node(dst)?);
        self.out[s as usize]
            .binary_search_by_key(&d, |&(n, _)| n)
            .ok()
            .map(|i| self.out[s as usize][i].1)
    }

    /// `(src, dst, weight)` triples in index order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(s, list)| list.iter().map(move |&(d, w)| (s as u32, d, w)))
    }

    pub fn out_neighbors(&self, node: u32) -> &[(u32, u32)] {
        &self.out[node as usize]
    }

    pub fn in_neighbors(&self, node: u32) -> &[(u32, u32)] {
        &self.inc[node as usize]
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            nodes: self.node_count(),
            edges: self.edge_count(),
            retweets: self.edges().map(|(_, _, w)| u64::from(w)).sum(),
            max_in_degree: self.inc.iter().map(Vec::len).max().unwrap_or(0),
            max_out_degree: self.out.iter().map(Vec::len).max().unwrap_or(0),
        }
    }

    /// Same graph with every edge reversed.
    pub fn reversed(&self) -> Self {
        Self::from_indexed(
            self.ids.clone(),
            self.edges().map(|(s, d, w)| (d, s, w)).collect(),
        )
    }

    /// Voting neighborhoods for propagation.
    fn neighborhoods(&self, mode: EdgeMode) -> Vec<Vec<(u32, u64)>> {
        (0..self.node_count())
            .map(|i| match mode {
                EdgeMode::Directed => self.out[i].iter().map(|&(n, w)| (n, u64::from(w))).collect(),
                EdgeMode::Undirected => {
                    let mut merged: BTreeMap<u32, u64> = BTreeMap::new();
                    for &(n, w) in self.out[i].iter().chain(&self.inc[i]) {
                        *merged.entry(n).or_default() += u64::from(w);
                    }
                    merged.into_iter().collect()
                }
            })
            .collect()
    }
}

pub fn build_graph<'a>(records: impl IntoIterator<Item = &'a TweetRecord>) -> RetweetGraph {
    let pairs: Vec<(&str, &str)> = records
        .into_iter()
        .filter_map(|r| r.retweeted_user_id.as_deref().map(|d| (r.user_id.as_str(), d)))
        .collect();
    RetweetGraph::from_retweets(pairs)
}

/// Seed accounts with fixed poles for one dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub dimension: Dimension,
    pub label_of: BTreeMap<String, Pole>,
}

impl SeedSet {
    pub fn new(dimension: Dimension) -> Self {
        Self {
            dimension,
            label_of: BTreeMap::new(),
        }
    }

    pub fn from_pairs<'a>(
        dimension: Dimension,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut seeds = Self::new(dimension);
        for (user, label) in pairs {
            let pole = dimension.parse_pole(label)?;
            seeds.insert(user, pole)?;
        }
        Ok(seeds)
    }

    pub fn insert(&mut self, user: &str, pole: Pole) -> Result<()> {
        let user = user.trim().trim_start_matches('@').to_owned();
        match self.label_of.insert(user.clone(), pole) {
            Some(prev) if prev != pole => Err(Error::invalid(format!(
                "seed {user:?} listed with both poles"
            ))),
            _ => Ok(()),
        }
    }

    /// Reads `user_id<TAB>pole` lines; blank lines, `#` comments and a
    /// `user_id` header are skipped. Leading '@' on handles is dropped.
    pub fn load(path: &Path, dimension: Dimension) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut seeds = Self::new(dimension);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (user, label) = line
                .split_once('\t')
                .or_else(|| line.split_once(char::is_whitespace))
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: "expected `user_id<TAB>pole`".into(),
                })?;
            if i == 0 && user.eq_ignore_ascii_case("user_id") {
                continue;
            }
            let pole = dimension.parse_pole(label.trim())?;
            seeds.insert(user, pole)?;
        }
        Ok(seeds)
    }

    pub fn write_tsv(&self) -> String {
        let mut s = String::new();
        for (user, pole) in &self.label_of {
            s.push_str(&format!("{user}\t{}\n", self.dimension.label(*pole)));
        }
        s
    }

    pub fn count(&self, pole: Pole) -> usize {
        self.label_of.values().filter(|&&p| p == pole).count()
    }

    pub fn len(&self) -> usize {
        self.label_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label_of.is_empty()
    }

    /// Seeds that do not appear in the graph. They are kept, but cannot
    /// influence propagation.
    pub fn missing_from(&self, g: &RetweetGraph) -> Vec<&str> {
        self.label_of
            .keys()
            .filter(|u| g.node(u).is_none())
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    /// Both endpoints of a retweet vote for each other.
    #[default]
    Undirected,
    /// Labels flow from the retweeted account to the retweeter.
    Directed,
}

impl FromStr for EdgeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "undirected" => Ok(EdgeMode::Undirected),
            "directed" => Ok(EdgeMode::Directed),
            other => Err(Error::invalid(format!("unknown edge mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpaParams {
    pub max_iter: usize,
    pub rng_seed: u64,
    pub mode: EdgeMode,
}

impl Default for LpaParams {
    fn default() -> Self {
        Self {
            max_iter: 100,
            rng_seed: 42,
            mode: EdgeMode::Undirected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpaOutcome {
    /// Label per node index; `None` for nodes no label reached.
    pub labels: Vec<Option<Pole>>,
    /// Number of nodes whose label changed in each sweep.
    pub changes_per_sweep: Vec<usize>,
    pub converged: bool,
}

impl LpaOutcome {
    pub fn sweeps(&self) -> usize {
        self.changes_per_sweep.len()
    }

    pub fn label_of(&self, g: &RetweetGraph, user: &str) -> Option<Pole> {
        g.node(user).and_then(|n| self.labels[n as usize])
    }

    pub fn to_map(&self, g: &RetweetGraph) -> BTreeMap<String, Pole> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|p| (g.user(i as u32).to_owned(), p)))
            .collect()
    }
}

/// Seed-clamped label propagation with two labels.
///
/// Each sweep visits the non-seed nodes in a freshly shuffled order and
/// assigns the label with the largest total edge weight among labeled
/// neighbors. A tie keeps the current label when it is among the tied
/// ones and is otherwise broken uniformly at random. Nodes with no labeled
/// neighbor keep what they have.
pub fn propagate_labels(g: &RetweetGraph, seeds: &SeedSet, params: &LpaParams) -> Result<LpaOutcome> {
    let n = g.node_count();
    let mut labels: Vec<Option<Pole>> = vec![None; n];
    let mut clamped = vec![false; n];
    for (user, &pole) in &seeds.label_of {
        if let Some(node) = g.node(user) {
            labels[node as usize] = Some(pole);
            clamped[node as usize] = true;
        }
    }
    let present = |pole| labels.iter().zip(&clamped).any(|(l, &c)| c && *l == Some(pole));
    if !clamped.iter().any(|&c| c) {
        return Err(Error::Insufficient(format!(
            "none of the {} {} seeds appear in the graph",
            seeds.len(),
            seeds.dimension
        )));
    }
    for pole in [Pole::Pos, Pole::Neg] {
        if !present(pole) {
            return Err(Error::Insufficient(format!(
                "no {} seed appears in the graph",
                seeds.dimension.label(pole)
            )));
        }
    }

    let nbrs = g.neighborhoods(params.mode);
    let mut order: Vec<u32> = (0..n as u32).filter(|&i| !clamped[i as usize]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut changes_per_sweep = Vec::new();
    let mut converged = false;

    for _ in 0..params.max_iter {
        order.shuffle(&mut rng);
        let mut changed = 0;
        for &node in &order {
            let (mut pos, mut neg) = (0u64, 0u64);
            for &(nb, w) in &nbrs[node as usize] {
                match labels[nb as usize] {
                    Some(Pole::Pos) => pos += w,
                    Some(Pole::Neg) => neg += w,
                    None => {}
                }
            }
            if pos == 0 && neg == 0 {
                continue;
            }
            let current = labels[node as usize];
            let next = match pos.cmp(&neg) {
                std::cmp::Ordering::Greater => Pole::Pos,
                std::cmp::Ordering::Less => Pole::Neg,
                std::cmp::Ordering::Equal => match current {
                    Some(p) => p,
                    None if rng.gen_bool(0.5) => Pole::Pos,
                    None => Pole::Neg,
                },
            };
            if current != Some(next) {
                labels[node as usize] = Some(next);
                changed += 1;
            }
        }
        changes_per_sweep.push(changed);
        if changed == 0 {
            converged = true;
            break;
        }
    }

    Ok(LpaOutcome {
        labels,
        changes_per_sweep,
        converged,
    })
}

/// Stratified k-fold evaluation of propagation on held-out seeds.
///
/// Only seeds present in the graph take part. Held-out seeds are treated
/// as unlabeled; the positive class is the dimension's +1 pole. A held-out
/// seed left unlabeled counts as a miss (false negative for a +1 seed,
/// false positive for a −1 seed).
pub fn holdout_eval<T: Real>(
    g: &RetweetGraph,
    seeds: &SeedSet,
    folds: usize,
    rng_seed: u64,
    params: &LpaParams,
) -> Result<EvalReport<T>> {
    let present: Vec<(&String, Pole)> = seeds
        .label_of
        .iter()
        .filter(|(u, _)| g.node(u).is_some())
        .map(|(u, &p)| (u, p))
        .collect();
    let truth: Vec<bool> = present.iter().map(|(_, p)| *p == Pole::Pos).collect();
    let assignment = stratified_folds(&truth, folds, rng_seed)?;

    let mut per_fold = Vec::with_capacity(folds);
    for fold in 0..folds {
        let mut train = SeedSet::new(seeds.dimension);
        for (i, (user, pole)) in present.iter().enumerate() {
            if assignment[i] != fold {
                train.label_of.insert((*user).clone(), *pole);
            }
        }
        let outcome = propagate_labels(g, &train, params)?;
        let mut confusion = Confusion::default();
        for (i, (user, pole)) in present.iter().enumerate() {
            if assignment[i] != fold {
                continue;
            }
            let predicted = outcome.label_of(g, user);
            match (*pole, predicted) {
                (Pole::Pos, Some(Pole::Pos)) => confusion.tp += 1,
                (Pole::Pos, _) => confusion.fn_ += 1,
                (Pole::Neg, Some(Pole::Neg)) => confusion.tn += 1,
                (Pole::Neg, _) => confusion.fp += 1,
            }
        }
        per_fold.push(confusion);
    }
    Ok(EvalReport::from_folds(&per_fold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeds(pairs: &[(&str, Pole)]) -> SeedSet {
        let mut s = SeedSet::new(Dimension::Science);
        for (u, p) in pairs {
            s.insert(u, *p).unwrap();
        }
        s
    }

    /// Two 5-cliques a0..a4 and b0..b4 joined by a bridge a0–b0.
    fn barbell() -> RetweetGraph {
        let names: Vec<String> = (0..5).map(|i| format!("a{i}")).chain((0..5).map(|i| format!("b{i}"))).collect();
        let mut pairs = Vec::new();
        for block in [0usize, 5] {
            for i in 0..5 {
                for j in 0..5 {
                    if i != j {
                        pairs.push((names[block + i].clone(), names[block + j].clone()));
                    }
                }
            }
        }
        pairs.push(("a0".into(), "b0".into()));
        RetweetGraph::from_retweets(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())))
    }

    #[test]
    fn collapses_counts_and_drops_self_loops() {
        let g = RetweetGraph::from_retweets([("u1", "u2"), ("u1", "u2"), ("u1", "u2"), ("u1", "u1")]);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight("u1", "u2"), Some(3));
        assert_eq!(g.weight("u2", "u1"), None);
        let stats = g.stats();
        assert_eq!(stats.retweets, 3);
        assert_eq!(stats.max_out_degree, 1);

        let empty = build_graph(std::iter::empty());
        assert_eq!(empty.node_count(), 0);
        let only_loop = RetweetGraph::from_retweets([("u1", "u1")]);
        assert_eq!(only_loop.edge_count(), 0);
    }

    #[test]
    fn graph_roundtrips_through_bincode() {
        let g = barbell();
        let bytes = bincode::serialize(&g).unwrap();
        let back: RetweetGraph = bincode::deserialize(&bytes).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn seed_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("science.tsv");
        std::fs::write(&path, "user_id\tpole\n@CDCgov\tpro_science\nquack\tanti_science\n").unwrap();
        let s = SeedSet::load(&path, Dimension::Science).unwrap();
        assert_eq!(s.label_of["CDCgov"], Pole::Pos);
        assert_eq!(s.label_of["quack"], Pole::Neg);

        std::fs::write(&path, "x\tcentrist\n").unwrap();
        assert!(matches!(SeedSet::load(&path, Dimension::Science), Err(Error::UnknownLabel { .. })));

        let g = RetweetGraph::from_retweets([("CDCgov", "a")]);
        assert_eq!(s.missing_from(&g), vec!["quack"]);
    }

    #[test]
    fn cliques_take_their_seed_label() {
        let g = barbell();
        let s = seeds(&[("a0", Pole::Pos), ("b0", Pole::Neg)]);
        for rng_seed in 0..20 {
            let out = propagate_labels(&g, &s, &LpaParams { rng_seed, ..Default::default() }).unwrap();
            for i in 0..5 {
                assert_eq!(out.label_of(&g, &format!("a{i}")), Some(Pole::Pos));
                assert_eq!(out.label_of(&g, &format!("b{i}")), Some(Pole::Neg));
            }
            assert!(out.converged);
        }
    }

    #[test]
    fn seeds_are_clamped() {
        // the seed's only neighbors are all opposite seeds
        let g = RetweetGraph::from_retweets([("s", "x"), ("s", "y"), ("x", "y")]);
        let s = seeds(&[("s", Pole::Pos), ("x", Pole::Neg), ("y", Pole::Neg)]);
        let out = propagate_labels(&g, &s, &LpaParams::default()).unwrap();
        assert_eq!(out.label_of(&g, "s"), Some(Pole::Pos));
    }

    #[test]
    fn unreachable_nodes_stay_unlabeled() {
        let g = RetweetGraph::from_retweets([("p", "q"), ("n", "m"), ("lone1", "lone2")]);
        let s = seeds(&[("p", Pole::Pos), ("n", Pole::Neg)]);
        let out = propagate_labels(&g, &s, &LpaParams::default()).unwrap();
        assert_eq!(out.label_of(&g, "q"), Some(Pole::Pos));
        assert_eq!(out.label_of(&g, "lone1"), None);
        assert_eq!(out.label_of(&g, "lone2"), None);
    }

    #[test]
    fn directed_mode_only_listens_to_retweeted_accounts() {
        // r retweets seed p; seed p retweets z; n is the opposite seed
        let g = RetweetGraph::from_retweets([("r", "p"), ("p", "z"), ("m", "n")]);
        let s = seeds(&[("p", Pole::Pos), ("n", Pole::Neg)]);
        let directed = LpaParams { mode: EdgeMode::Directed, ..Default::default() };
        let out = propagate_labels(&g, &s, &directed).unwrap();
        assert_eq!(out.label_of(&g, "r"), Some(Pole::Pos));
        assert_eq!(out.label_of(&g, "m"), Some(Pole::Neg));
        assert_eq!(out.label_of(&g, "z"), None);

        let out = propagate_labels(&g, &s, &LpaParams::default()).unwrap();
        assert_eq!(out.label_of(&g, "z"), Some(Pole::Pos));
    }

    #[test]
    fn missing_seeds_are_errors() {
        let g = RetweetGraph::from_retweets([("a", "b")]);
        assert!(propagate_labels(&g, &seeds(&[("zz", Pole::Pos)]), &LpaParams::default()).is_err());
        assert!(propagate_labels(&g, &seeds(&[("a", Pole::Pos)]), &LpaParams::default()).is_err());
    }

    #[test]
    fn deterministic_and_direction_symmetric_when_undirected() {
        let mut pairs = Vec::new();
        for i in 0..40u32 {
            pairs.push((format!("n{i}"), format!("n{}", (i * 7 + 3) % 40)));
            pairs.push((format!("n{i}"), format!("n{}", (i * 13 + 5) % 40)));
        }
        let g = RetweetGraph::from_retweets(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        let s = seeds(&[("n0", Pole::Pos), ("n1", Pole::Neg), ("n20", Pole::Pos), ("n21", Pole::Neg)]);
        let p = LpaParams { rng_seed: 9, ..Default::default() };
        let a = propagate_labels(&g, &s, &p).unwrap();
        let b = propagate_labels(&g, &s, &p).unwrap();
        assert_eq!(a, b);
        let r = propagate_labels(&g.reversed(), &s, &p).unwrap();
        assert_eq!(a, r);
        assert!(a.sweeps() <= p.max_iter);
    }

    #[test]
    fn holdout_on_edgeless_graph_recalls_nothing() {
        // seeds exist as nodes only through edges to throwaway accounts
        let mut pairs = Vec::new();
        let mut s = SeedSet::new(Dimension::Political);
        for i in 0..10 {
            let u = format!("s{i}");
            pairs.push((u.clone(), format!("sink{i}")));
            s.insert(&u, if i % 2 == 0 { Pole::Pos } else { Pole::Neg }).unwrap();
        }
        let g = RetweetGraph::from_retweets(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        let report: EvalReport = holdout_eval(&g, &s, 5, 1, &LpaParams::default()).unwrap();
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.confusion.total(), 10);
    }

    #[test]
    fn holdout_needs_enough_seeds() {
        let g = RetweetGraph::from_retweets([("a", "b"), ("c", "d")]);
        let s = seeds(&[("a", Pole::Pos), ("c", Pole::Neg)]);
        assert!(holdout_eval::<f64>(&g, &s, 5, 1, &LpaParams::default()).is_err());
    }
}
