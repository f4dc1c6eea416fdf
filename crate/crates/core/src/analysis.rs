//! Downstream analyses: opinion drift over time, ideology group composition,
//! distinguishing hashtags, geography and cross-dimension heatmaps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{score_domains, CrossScore, DomainCatalog, Pole};
use crate::corpus::UserAggregate;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered, non-overlapping date intervals (inclusive). Buckets are
/// numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiweeklySpec {
    intervals: Vec<(NaiveDate, NaiveDate)>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl Default for BiweeklySpec {
    /// The seven intervals of 21 Jan – 1 May 2020.
    fn default() -> Self {
        Self {
            intervals: vec![
                (ymd(2020, 1, 21), ymd(2020, 1, 31)),
                (ymd(2020, 2, 1), ymd(2020, 2, 15)),
                (ymd(2020, 2, 16), ymd(2020, 2, 29)),
                (ymd(2020, 3, 1), ymd(2020, 3, 16)),
                (ymd(2020, 3, 17), ymd(2020, 3, 31)),
                (ymd(2020, 4, 1), ymd(2020, 4, 15)),
                (ymd(2020, 4, 16), ymd(2020, 5, 1)),
            ],
        }
    }
}

impl BiweeklySpec {
    pub fn new(intervals: Vec<(NaiveDate, NaiveDate)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("no intervals"));
        }
        for (i, &(start, end)) in intervals.iter().enumerate() {
            if end < start {
                return Err(Error::invalid(format!("interval {} ends before it starts", i + 1)));
            }
            if i > 0 && start <= intervals[i - 1].1 {
                return Err(Error::invalid(format!("interval {} overlaps its predecessor", i + 1)));
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(NaiveDate, NaiveDate)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// 1-based bucket holding the given day.
    pub fn bucket_of_date(&self, day: NaiveDate) -> Option<usize> {
        self.intervals
            .iter()
            .position(|&(s, e)| day >= s && day <= e)
            .map(|i| i + 1)
    }

    pub fn bucket_of(&self, ts: &DateTime<Utc>) -> Option<usize> {
        self.bucket_of_date(ts.date_naive())
    }

    /// True when consecutive intervals leave no day uncovered.
    pub fn is_contiguous(&self) -> bool {
        self.intervals
            .windows(2)
            .all(|w| w[0].1.succ_opt() == Some(w[1].0))
    }
}

/// Cumulative domain-score paths of the users eligible for drift analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScorePaths<T = f64> {
    pub users: Vec<String>,
    /// `paths[i][t]` is user i's score over buckets `1..=t+1`.
    pub paths: Vec<Vec<T>>,
}

/// Builds cumulative score paths for users with at least one
/// catalog-matched share in every bucket.
pub fn cumulative_paths<'a, T: Real>(
    aggs: impl IntoIterator<Item = &'a UserAggregate>,
    catalog: &DomainCatalog,
    n_buckets: usize,
) -> ScorePaths<T> {
    let mut users = Vec::new();
    let mut paths = Vec::new();
    'user: for agg in aggs {
        let mut running: BTreeMap<String, u32> = BTreeMap::new();
        let mut path = Vec::with_capacity(n_buckets);
        for b in 1..=n_buckets {
            let Some(doms) = agg.per_bucket_domains.get(&b) else {
                continue 'user;
            };
            if !doms.keys().any(|d| catalog.pole(d).is_some()) {
                continue 'user;
            }
            for (d, c) in doms {
                *running.entry(d.clone()).or_default() += c;
            }
            let score = score_domains::<T>(&agg.user_id, &running, catalog);
            path.push(score.delta.expect("bucket has a matched share"));
        }
        users.push(agg.user_id.clone());
        paths.push(path);
    }
    ScorePaths { users, paths }
}

/// Mean absolute change between consecutive entries of every path.
pub fn delta_series<T: Real>(paths: &[Vec<T>]) -> Result<Vec<T>> {
    let Some(first) = paths.first() else {
        return Err(Error::Insufficient("no users with complete score paths".into()));
    };
    let len = first.len();
    if paths.iter().any(|p| p.len() != len) {
        return Err(Error::invalid("score paths differ in length"));
    }
    let n = T::of_usize(paths.len());
    Ok((1..len)
        .map(|t| paths.iter().map(|p| (p[t] - p[t - 1]).abs()).sum::<T>() / n)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IdeologyGroup {
    ProSciLeft,
    ProSciModerate,
    ProSciRight,
    AntiSciLeft,
    AntiSciModerate,
    AntiSciRight,
}

impl IdeologyGroup {
    pub const ALL: [IdeologyGroup; 6] = [
        IdeologyGroup::ProSciLeft,
        IdeologyGroup::ProSciModerate,
        IdeologyGroup::ProSciRight,
        IdeologyGroup::AntiSciLeft,
        IdeologyGroup::AntiSciModerate,
        IdeologyGroup::AntiSciRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IdeologyGroup::ProSciLeft => "ProSci-Left",
            IdeologyGroup::ProSciModerate => "ProSci-Moderate",
            IdeologyGroup::ProSciRight => "ProSci-Right",
            IdeologyGroup::AntiSciLeft => "AntiSci-Left",
            IdeologyGroup::AntiSciModerate => "AntiSci-Moderate",
            IdeologyGroup::AntiSciRight => "AntiSci-Right",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn science(self) -> Pole {
        match self {
            IdeologyGroup::ProSciLeft | IdeologyGroup::ProSciModerate | IdeologyGroup::ProSciRight => Pole::Pos,
            _ => Pole::Neg,
        }
    }

    pub fn moderacy(self) -> Pole {
        match self {
            IdeologyGroup::ProSciModerate | IdeologyGroup::AntiSciModerate => Pole::Pos,
            _ => Pole::Neg,
        }
    }

    /// Political pole; only hardline groups have one.
    pub fn political(self) -> Option<Pole> {
        match self {
            IdeologyGroup::ProSciLeft | IdeologyGroup::AntiSciLeft => Some(Pole::Neg),
            IdeologyGroup::ProSciRight | IdeologyGroup::AntiSciRight => Some(Pole::Pos),
            _ => None,
        }
    }
}

impl fmt::Display for IdeologyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IdeologyGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IdeologyGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown ideology group {s:?}")))
    }
}

/// Combines per-dimension poles into one of the six groups. Moderates
/// ignore the political pole; hardliners need one.
pub fn assign_group(science: Option<Pole>, moderacy: Option<Pole>, political: Option<Pole>) -> Option<IdeologyGroup> {
    use IdeologyGroup::*;
    let pro = science? == Pole::Pos;
    Some(match (pro, moderacy?, political) {
        (true, Pole::Pos, _) => ProSciModerate,
        (false, Pole::Pos, _) => AntiSciModerate,
        (true, Pole::Neg, Some(Pole::Neg)) => ProSciLeft,
        (true, Pole::Neg, Some(Pole::Pos)) => ProSciRight,
        (false, Pole::Neg, Some(Pole::Neg)) => AntiSciLeft,
        (false, Pole::Neg, Some(Pole::Pos)) => AntiSciRight,
        (_, Pole::Neg, None) => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ActivityRow<T = f64> {
    pub bucket: usize,
    pub active: usize,
    /// Indexed like [`IdeologyGroup::ALL`]; all zero when `empty`.
    pub fractions: Vec<T>,
    pub empty: bool,
}

/// Per bucket, the share of active classified users in each group. A
/// user is active in a bucket when they tweeted in it at least once.
pub fn group_activity_series<'a, T: Real>(
    groups: &BTreeMap<String, IdeologyGroup>,
    aggs: impl IntoIterator<Item = &'a UserAggregate>,
    n_buckets: usize,
) -> Vec<ActivityRow<T>> {
    let mut counts = vec![[0usize; 6]; n_buckets];
    for agg in aggs {
        let Some(g) = groups.get(&agg.user_id) else { continue };
        for (&b, &n) in &agg.tweets_per_bucket {
            if n > 0 && (1..=n_buckets).contains(&b) {
                counts[b - 1][g.index()] += 1;
            }
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let active: usize = row.iter().sum();
            let fractions = row
                .iter()
                .map(|&c| if active == 0 { T::zero() } else { T::of_usize(c) / T::of_usize(active) })
                .collect();
            ActivityRow {
                bucket: i + 1,
                active,
                fractions,
                empty: active == 0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupHashtags {
    pub per_group: BTreeMap<IdeologyGroup, Vec<(String, u64)>>,
    /// Hashtags found in every group's unfiltered top-k and removed.
    pub common: Vec<String>,
}

fn ranked(counts: &BTreeMap<String, u64>) -> Vec<(String, u64)> {
    let mut v: Vec<(String, u64)> = counts.iter().map(|(t, &c)| (t.clone(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Each group's `k` most frequent hashtags after dropping those that are in
/// all six groups' unfiltered top-`k` lists.
pub fn top_group_hashtags<'a>(
    groups: &BTreeMap<String, IdeologyGroup>,
    aggs: impl IntoIterator<Item = &'a UserAggregate>,
    k: usize,
) -> GroupHashtags {
    let mut totals: BTreeMap<IdeologyGroup, BTreeMap<String, u64>> =
        IdeologyGroup::ALL.iter().map(|&g| (g, BTreeMap::new())).collect();
    for agg in aggs {
        let Some(g) = groups.get(&agg.user_id) else { continue };
        let entry = totals.get_mut(g).expect("all groups present");
        for (tag, &c) in &agg.hashtag_counts {
            *entry.entry(tag.clone()).or_default() += u64::from(c);
        }
    }
    let rankings: BTreeMap<IdeologyGroup, Vec<(String, u64)>> =
        totals.iter().map(|(&g, c)| (g, ranked(c))).collect();
    let mut common: Option<BTreeSet<&str>> = None;
    for list in rankings.values() {
        let top: BTreeSet<&str> = list.iter().take(k).map(|(t, _)| t.as_str()).collect();
        common = Some(match common {
            None => top,
            Some(acc) => acc.intersection(&top).copied().collect(),
        });
    }
    let common: BTreeSet<String> = common.unwrap_or_default().into_iter().map(str::to_owned).collect();
    let per_group = rankings
        .into_iter()
        .map(|(g, list)| {
            let kept = list.into_iter().filter(|(t, _)| !common.contains(t)).take(k).collect();
            (g, kept)
        })
        .collect();
    GroupHashtags {
        per_group,
        common: common.into_iter().collect(),
    }
}

pub const MIN_STATE_USERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StateRow<T = f64> {
    pub state: String,
    pub users: usize,
    /// Indexed like [`IdeologyGroup::ALL`]; `None` when suppressed.
    pub fractions: Option<Vec<T>>,
}

/// Group composition of each state's classified users. States with fewer
/// than `min_users` classified users are reported without fractions.
pub fn state_fractions<'a, T: Real>(
    groups: &BTreeMap<String, IdeologyGroup>,
    aggs: impl IntoIterator<Item = &'a UserAggregate>,
    min_users: usize,
) -> Vec<StateRow<T>> {
    let mut counts: BTreeMap<String, [usize; 6]> = BTreeMap::new();
    for agg in aggs {
        let (Some(g), Some(state)) = (groups.get(&agg.user_id), &agg.state) else {
            continue;
        };
        counts.entry(state.clone()).or_default()[g.index()] += 1;
    }
    counts
        .into_iter()
        .map(|(state, row)| {
            let users: usize = row.iter().sum();
            let fractions = (users >= min_users && users > 0)
                .then(|| row.iter().map(|&c| T::of_usize(c) / T::of_usize(users)).collect());
            StateRow { state, users, fractions }
        })
        .collect()
}

/// Two `bins × bins` count grids over `[-1, 1]²`, rows indexed by the
/// science score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmaps {
    pub bins: usize,
    pub science_political: Vec<Vec<u64>>,
    pub science_moderacy: Vec<Vec<u64>>,
}

impl Heatmaps {
    pub fn total(grid: &[Vec<u64>]) -> u64 {
        grid.iter().flatten().sum()
    }
}

/// Bin of a score in `[-1, 1]`; `+1` falls in the last bin.
pub fn score_bin<T: Real>(v: T, bins: usize) -> usize {
    let x = ((v + T::one()) / (T::one() + T::one()) * T::of_usize(bins)).floor();
    x.to_usize().unwrap_or(0).min(bins - 1)
}

pub fn score_heatmap<T: Real>(table: &BTreeMap<String, CrossScore<T>>, bins: usize) -> Result<Heatmaps> {
    if bins == 0 {
        return Err(Error::invalid("heatmap needs at least one bin"));
    }
    let mut sp = vec![vec![0u64; bins]; bins];
    let mut sm = vec![vec![0u64; bins]; bins];
    for s in table.values() {
        let i = score_bin(s.science, bins);
        sp[i][score_bin(s.political, bins)] += 1;
        sm[i][score_bin(s.moderacy, bins)] += 1;
    }
    Ok(Heatmaps {
        bins,
        science_political: sp,
        science_moderacy: sm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Dimension;
    use approx::assert_relative_eq;
    use IdeologyGroup::*;

    fn agg(id: &str, buckets: &[usize], tags: &[(&str, u32)], state: Option<&str>) -> UserAggregate {
        UserAggregate {
            user_id: id.into(),
            tweets_per_bucket: buckets.iter().map(|&b| (b, 1)).collect(),
            hashtag_counts: tags.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            state: state.map(str::to_owned),
            ..Default::default()
        }
    }

    #[test]
    fn default_intervals() {
        let s = BiweeklySpec::default();
        assert_eq!(s.len(), 7);
        assert!(s.is_contiguous());
        assert_eq!(s.bucket_of_date(ymd(2020, 1, 25)), Some(1));
        assert_eq!(s.bucket_of_date(ymd(2020, 2, 29)), Some(3));
        assert_eq!(s.bucket_of_date(ymd(2020, 4, 20)), Some(7));
        assert_eq!(s.bucket_of_date(ymd(2020, 5, 2)), None);
        assert!(BiweeklySpec::new(vec![(ymd(2020, 1, 5), ymd(2020, 1, 10)), (ymd(2020, 1, 10), ymd(2020, 1, 12))]).is_err());
    }

    #[test]
    fn drift_of_hand_paths() {
        let paths = vec![vec![1.0, 0.5, 0.5], vec![-1.0, -1.0, 0.0]];
        let d = delta_series(&paths).unwrap();
        assert_eq!(d, vec![0.25, 0.5]);
        let flat = vec![vec![0.3; 7]; 4];
        assert!(delta_series(&flat).unwrap().iter().all(|&x| x == 0.0));
        assert!(delta_series::<f64>(&[]).is_err());
        assert!(delta_series(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn cumulative_paths_need_every_bucket() {
        let cat = DomainCatalog::from_rows(Dimension::Science, [("good.org", "pro_science"), ("bad.com", "anti_science")]).unwrap();
        let mut a = UserAggregate { user_id: "a".into(), ..Default::default() };
        a.per_bucket_domains.insert(1, [("good.org".to_string(), 1)].into());
        a.per_bucket_domains.insert(2, [("bad.com".to_string(), 1)].into());
        a.per_bucket_domains.insert(3, [("bad.com".to_string(), 2)].into());
        let mut b = a.clone();
        b.user_id = "b".into();
        b.per_bucket_domains.insert(2, [("other.net".to_string(), 5)].into());
        let p: ScorePaths = cumulative_paths([&a, &b], &cat, 3);
        assert_eq!(p.users, vec!["a"]);
        assert_eq!(p.paths[0], vec![1.0, 0.0, -0.5]);
    }

    #[test]
    fn group_assignment() {
        assert_eq!(assign_group(Some(Pole::Pos), Some(Pole::Neg), Some(Pole::Neg)), Some(ProSciLeft));
        assert_eq!(assign_group(Some(Pole::Neg), Some(Pole::Pos), None), Some(AntiSciModerate));
        assert_eq!(assign_group(Some(Pole::Pos), Some(Pole::Neg), None), None);
        assert_eq!(assign_group(None, Some(Pole::Pos), Some(Pole::Pos)), None);
        for s in [Pole::Pos, Pole::Neg] {
            for m in [Pole::Pos, Pole::Neg] {
                for p in [Pole::Pos, Pole::Neg] {
                    let g = assign_group(Some(s), Some(m), Some(p)).unwrap();
                    assert_eq!(g.science(), s);
                    assert_eq!(g.moderacy(), m);
                    if m == Pole::Neg {
                        assert_eq!(g.political(), Some(p));
                    } else {
                        assert_eq!(g.political(), None);
                    }
                }
            }
        }
    }

    #[test]
    fn activity_fractions() {
        let groups: BTreeMap<String, IdeologyGroup> =
            IdeologyGroup::ALL.iter().enumerate().map(|(i, &g)| (format!("u{i}"), g)).collect();
        let aggs: Vec<_> = (0..6).map(|i| agg(&format!("u{i}"), &[1, 2], &[], None)).collect();
        let rows: Vec<ActivityRow> = group_activity_series(&groups, &aggs, 3);
        for f in &rows[0].fractions {
            assert_relative_eq!(*f, 1.0 / 6.0);
        }
        assert!((rows[1].fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(rows[2].empty);
        assert_eq!(rows[2].active, 0);
    }

    #[test]
    fn hashtags_common_to_all_groups_are_removed() {
        let mut groups = BTreeMap::new();
        let mut aggs = Vec::new();
        for (i, g) in IdeologyGroup::ALL.iter().enumerate() {
            let id = format!("u{i}");
            groups.insert(id.clone(), *g);
            let own = format!("only{i}");
            aggs.push(agg(&id, &[], &[("covid", 10), (own.as_str(), 3)], None));
        }
        let out = top_group_hashtags(&groups, &aggs, 50);
        assert_eq!(out.common, vec!["covid"]);
        assert_eq!(out.per_group[&ProSciLeft], vec![("only0".to_string(), 3)]);
    }

    #[test]
    fn state_table() {
        let mut groups = BTreeMap::new();
        let mut aggs = Vec::new();
        for i in 0..40 {
            let id = format!("tx{i}");
            groups.insert(id.clone(), if i < 10 { ProSciModerate } else { AntiSciRight });
            aggs.push(agg(&id, &[], &[], Some("TX")));
        }
        aggs.push(agg("ri", &[], &[], Some("RI")));
        groups.insert("ri".into(), ProSciLeft);
        let rows: Vec<StateRow> = state_fractions(&groups, &aggs, 20);
        let ri = rows.iter().find(|r| r.state == "RI").unwrap();
        assert_eq!(ri.fractions, None);
        let tx = rows.iter().find(|r| r.state == "TX").unwrap().fractions.clone().unwrap();
        assert_relative_eq!(tx[ProSciModerate.index()], 0.25);
        assert!((tx.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heatmap_binning() {
        let mut t = BTreeMap::new();
        for i in 0..4 {
            t.insert(format!("u{i}"), CrossScore { science: 1.0, political: -1.0, moderacy: 0.0 });
        }
        let h = score_heatmap(&t, 20).unwrap();
        assert_eq!(h.science_political[19][0], 4);
        assert_eq!(h.science_moderacy[19][10], 4);
        assert_eq!(Heatmaps::total(&h.science_political), 4);
        assert_eq!(score_bin(-1.0f64, 20), 0);
        assert_eq!(score_bin(-0.85f64, 20), 1);
    }
}
