//! Curated domain catalogs, per-user domain scores and quantile binning.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{extract_domain, UserAggregate};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default minimum number of catalog-matched shares before a score is binned.
pub const MIN_DOMAINS: usize = 3;
/// Default tail mass assigned to each pole when binning.
pub const POLE_QUANTILE: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Science,
    Political,
    Moderacy,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Science, Dimension::Political, Dimension::Moderacy];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Science => "science",
            Dimension::Political => "political",
            Dimension::Moderacy => "moderacy",
        }
    }

    /// Label of the +1 pole.
    pub fn pos_label(self) -> PoleLabel {
        match self {
            Dimension::Science => PoleLabel::ProScience,
            Dimension::Political => PoleLabel::Conservative,
            Dimension::Moderacy => PoleLabel::Moderate,
        }
    }

    /// Label of the −1 pole.
    pub fn neg_label(self) -> PoleLabel {
        match self {
            Dimension::Science => PoleLabel::AntiScience,
            Dimension::Political => PoleLabel::Liberal,
            Dimension::Moderacy => PoleLabel::Hardline,
        }
    }

    pub fn label(self, pole: Pole) -> PoleLabel {
        match pole {
            Pole::Pos => self.pos_label(),
            Pole::Neg => self.neg_label(),
        }
    }

    /// Parses a pole label and checks it belongs to this dimension.
    pub fn parse_pole(self, label: &str) -> Result<Pole> {
        let unknown = || Error::UnknownLabel {
            label: label.to_owned(),
            dimension: self.to_string(),
        };
        let parsed: PoleLabel = label.parse().map_err(|_| unknown())?;
        if parsed.dimension() != self {
            return Err(unknown());
        }
        Ok(parsed.pole())
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "science" => Ok(Dimension::Science),
            "political" => Ok(Dimension::Political),
            "moderacy" => Ok(Dimension::Moderacy),
            other => Err(Error::invalid(format!("unknown dimension {other:?}"))),
        }
    }
}

/// One side of a dimension: `Pos` is the +1 pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pole {
    Neg,
    Pos,
}

impl Pole {
    pub fn value(self) -> i64 {
        match self {
            Pole::Pos => 1,
            Pole::Neg => -1,
        }
    }

    pub fn opposite(self) -> Pole {
        match self {
            Pole::Pos => Pole::Neg,
            Pole::Neg => Pole::Pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleLabel {
    ProScience,
    AntiScience,
    Liberal,
    Conservative,
    Moderate,
    Hardline,
}

impl PoleLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PoleLabel::ProScience => "pro_science",
            PoleLabel::AntiScience => "anti_science",
            PoleLabel::Liberal => "liberal",
            PoleLabel::Conservative => "conservative",
            PoleLabel::Moderate => "moderate",
            PoleLabel::Hardline => "hardline",
        }
    }

    pub fn dimension(self) -> Dimension {
        match self {
            PoleLabel::ProScience | PoleLabel::AntiScience => Dimension::Science,
            PoleLabel::Liberal | PoleLabel::Conservative => Dimension::Political,
            PoleLabel::Moderate | PoleLabel::Hardline => Dimension::Moderacy,
        }
    }

    pub fn pole(self) -> Pole {
        match self {
            PoleLabel::ProScience | PoleLabel::Conservative | PoleLabel::Moderate => Pole::Pos,
            PoleLabel::AntiScience | PoleLabel::Liberal | PoleLabel::Hardline => Pole::Neg,
        }
    }
}

impl fmt::Display for PoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PoleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match norm.as_str() {
            "pro_science" => PoleLabel::ProScience,
            "anti_science" => PoleLabel::AntiScience,
            "liberal" | "left" => PoleLabel::Liberal,
            "conservative" | "right" => PoleLabel::Conservative,
            "moderate" => PoleLabel::Moderate,
            "hardline" => PoleLabel::Hardline,
            _ => {
                return Err(Error::UnknownLabel {
                    label: s.to_owned(),
                    dimension: "any".into(),
                })
            }
        })
    }
}

/// Curated domain → pole map for one dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCatalog {
    pub dimension: Dimension,
    pub pole_of: BTreeMap<String, Pole>,
}

impl DomainCatalog {
    pub fn new(dimension: Dimension) -> Self {
        Self {
            dimension,
            pole_of: BTreeMap::new(),
        }
    }

    /// Adds a domain; re-adding with the same pole is a no-op, with the
    /// opposite pole an error.
    pub fn insert(&mut self, domain: &str, pole: Pole) -> Result<()> {
        let domain = extract_domain(domain).unwrap_or_else(|| domain.trim().to_lowercase());
        match self.pole_of.get(&domain) {
            Some(&existing) if existing != pole => Err(Error::ConflictingDomain { domain }),
            Some(_) => Ok(()),
            None => {
                self.pole_of.insert(domain, pole);
                Ok(())
            }
        }
    }

    pub fn from_rows<'a>(
        dimension: Dimension,
        rows: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut catalog = Self::new(dimension);
        for (domain, label) in rows {
            let pole = dimension.parse_pole(label)?;
            catalog.insert(domain, pole)?;
        }
        Ok(catalog)
    }

    /// Reads a `domain,label` CSV. A leading `domain,label` header is optional.
    pub fn load(path: &Path, dimension: Dimension) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Parse {
                path: path.into(),
                line: 0,
                message: e.to_string(),
            })?;
        let mut catalog = Self::new(dimension);
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let line = i + 1;
            if row.len() < 2 {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: "expected `domain,label`".into(),
                });
            }
            if line == 1 && row[0].eq_ignore_ascii_case("domain") {
                continue;
            }
            let pole = dimension.parse_pole(&row[1])?;
            catalog.insert(&row[0], pole)?;
        }
        Ok(catalog)
    }

    /// Adds every political domain, of either side, to the hardline pole of
    /// a moderacy catalog.
    pub fn with_political_hardline(mut self, political: &DomainCatalog) -> Result<Self> {
        if self.dimension != Dimension::Moderacy || political.dimension != Dimension::Political {
            return Err(Error::invalid(
                "hardline extension needs a moderacy catalog and a political catalog",
            ));
        }
        for domain in political.pole_of.keys() {
            self.insert(domain, Pole::Neg)?;
        }
        Ok(self)
    }

    pub fn pole(&self, domain: &str) -> Option<Pole> {
        self.pole_of.get(domain).copied()
    }

    pub fn len(&self) -> usize {
        self.pole_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pole_of.is_empty()
    }

    pub fn count(&self, pole: Pole) -> usize {
        self.pole_of.values().filter(|&&p| p == pole).count()
    }
}

/// The three catalogs used by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogSet {
    pub science: DomainCatalog,
    pub political: DomainCatalog,
    pub moderacy: DomainCatalog,
}

impl CatalogSet {
    /// Loads `science.csv`, `political.csv` and `moderacy.csv` from `dir`;
    /// political domains are folded into the moderacy hardline pole.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let load = |dim: Dimension| {
            let path = dir.join(format!("{dim}.csv"));
            if !path.exists() {
                return Err(Error::invalid(format!("catalog {} not found", path.display())));
            }
            DomainCatalog::load(&path, dim)
        };
        let science = load(Dimension::Science)?;
        let political = load(Dimension::Political)?;
        let moderacy = load(Dimension::Moderacy)?.with_political_hardline(&political)?;
        Ok(Self {
            science,
            political,
            moderacy,
        })
    }

    pub fn get(&self, dim: Dimension) -> &DomainCatalog {
        match dim {
            Dimension::Science => &self.science,
            Dimension::Political => &self.political,
            Dimension::Moderacy => &self.moderacy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bin {
    NegPole,
    Unbinned,
    PosPole,
}

impl Bin {
    pub fn pole(self) -> Option<Pole> {
        match self {
            Bin::NegPole => Some(Pole::Neg),
            Bin::PosPole => Some(Pole::Pos),
            Bin::Unbinned => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bin::NegPole => "neg",
            Bin::Unbinned => "none",
            Bin::PosPole => "pos",
        }
    }
}

impl FromStr for Bin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "neg" => Ok(Bin::NegPole),
            "none" => Ok(Bin::Unbinned),
            "pos" => Ok(Bin::PosPole),
            other => Err(Error::invalid(format!("unknown bin {other:?}"))),
        }
    }
}

/// A user's domain score along one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DimScore<T = f64> {
    pub user_id: String,
    pub dimension: Dimension,
    /// Mean pole value of the matched shares; `None` when nothing matched.
    pub delta: Option<T>,
    pub n_domains: usize,
    pub bin: Bin,
}

impl<T: Real> DimScore<T> {
    /// Has a defined score backed by at least `min_domains` matched shares.
    pub fn is_eligible(&self, min_domains: usize) -> bool {
        self.delta.is_some() && self.n_domains >= min_domains && self.n_domains > 0
    }
}

/// Scores a multiset of shared domains against one catalog.
///
/// Every share counts, so a domain shared five times contributes five terms.
pub fn score_domains<T: Real>(
    user_id: &str,
    domains: &BTreeMap<String, u32>,
    catalog: &DomainCatalog,
) -> DimScore<T> {
    let mut sum = 0i64;
    let mut n = 0usize;
    for (domain, &count) in domains {
        if let Some(pole) = catalog.pole(domain) {
            sum += pole.value() * i64::from(count);
            n += count as usize;
        }
    }
    DimScore {
        user_id: user_id.to_owned(),
        dimension: catalog.dimension,
        delta: (n > 0).then(|| T::of_i64(sum) / T::of_usize(n)),
        n_domains: n,
        bin: Bin::Unbinned,
    }
}

pub fn domain_score<T: Real>(agg: &UserAggregate, catalog: &DomainCatalog) -> DimScore<T> {
    score_domains(&agg.user_id, &agg.shared_domains, catalog)
}

/// Lower and upper binning thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Cutoffs<T = f64> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Cutoffs<T> {
    /// `delta ≥ hi` → PosPole, `delta ≤ lo` → NegPole. A value satisfying
    /// both (only possible when `lo ≥ hi`) stays unbinned.
    pub fn bin(&self, delta: T) -> Bin {
        match (delta >= self.hi, delta <= self.lo) {
            (true, false) => Bin::PosPole,
            (false, true) => Bin::NegPole,
            _ => Bin::Unbinned,
        }
    }
}

/// 1-based nearest rank `⌈p·n⌉`, clamped to `[1, n]`.
///
/// The product is nudged down by a relative epsilon so that e.g.
/// `0.7 · 10 = 7.000000000000001` lands on rank 7.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    let rank = (x - x.abs() * 1e-12).ceil() as usize;
    rank.clamp(1, n.max(1))
}

/// Nearest-rank quantile of an ascending slice.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    sorted[nearest_rank(p, sorted.len()) - 1]
}

/// Computes the `q` / `1−q` nearest-rank cutoffs of the eligible scores.
pub fn quantile_cutoffs<T: Real>(
    scores: &[DimScore<T>],
    q: f64,
    min_domains: usize,
) -> Result<Cutoffs<T>> {
    if !(0.0..0.5).contains(&q) || q == 0.0 {
        return Err(Error::invalid(format!("quantile {q} outside (0, 0.5)")));
    }
    let mut deltas: Vec<T> = scores
        .iter()
        .filter(|s| s.is_eligible(min_domains))
        .filter_map(|s| s.delta)
        .collect();
    if deltas.is_empty() {
        return Err(Error::Insufficient("no eligible scores to bin".into()));
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    Ok(Cutoffs {
        lo: quantile_sorted(&deltas, q),
        hi: quantile_sorted(&deltas, 1.0 - q),
    })
}

/// Fills `bin` on every eligible score using fixed cutoffs. Ineligible
/// scores are left unbinned.
pub fn apply_cutoffs<T: Real>(scores: &mut [DimScore<T>], cutoffs: &Cutoffs<T>, min_domains: usize) {
    for s in scores.iter_mut() {
        s.bin = match s.delta {
            Some(d) if s.is_eligible(min_domains) => cutoffs.bin(d),
            _ => Bin::Unbinned,
        };
    }
}

/// Bins the top and bottom `q` of the eligible score distribution.
pub fn bin_scores<T: Real>(
    mut scores: Vec<DimScore<T>>,
    q: f64,
    min_domains: usize,
) -> Result<(Vec<DimScore<T>>, Cutoffs<T>)> {
    let cutoffs = quantile_cutoffs(&scores, q, min_domains)?;
    apply_cutoffs(&mut scores, &cutoffs, min_domains);
    Ok((scores, cutoffs))
}

/// A user with eligible scores on all three dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CrossScore<T = f64> {
    pub science: T,
    pub political: T,
    pub moderacy: T,
}

/// Inner join of the three dimensions' eligible scores on user id.
pub fn cross_dimension_table<T: Real>(
    science: &[DimScore<T>],
    political: &[DimScore<T>],
    moderacy: &[DimScore<T>],
    min_domains: usize,
) -> BTreeMap<String, CrossScore<T>> {
    let index = |scores: &[DimScore<T>]| -> BTreeMap<String, T> {
        scores
            .iter()
            .filter(|s| s.is_eligible(min_domains))
            .filter_map(|s| s.delta.map(|d| (s.user_id.clone(), d)))
            .collect()
    };
    let pol = index(political);
    let md = index(moderacy);
    index(science)
        .into_iter()
        .filter_map(|(user, sci)| {
            let p = *pol.get(&user)?;
            let m = *md.get(&user)?;
            Some((
                user,
                CrossScore {
                    science: sci,
                    political: p,
                    moderacy: m,
                },
            ))
        })
        .collect()
}
