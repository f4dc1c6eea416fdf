//! Tweet corpus ingestion.
//!
//! Input is UTF-8 line-delimited JSON, one post per line. Records are parsed
//! into [`TweetRecord`]s and folded into per-user [`UserAggregate`]s. Parsing
//! never aborts on a bad line: malformed and out-of-window records are
//! counted in [`ParseStats`] and skipped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::BiweeklySpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    /// Lowercased, without the leading '#'.
    pub hashtags: Vec<String>,
    pub urls: Vec<String>,
    pub retweeted_user_id: Option<String>,
    /// Two-letter US state code.
    pub state: Option<String>,
}

/// Inclusive range of calendar days (UTC) a record must fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!("window end {end} precedes start {start}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, ts: &DateTime<Utc>) -> bool {
        let day = ts.date_naive();
        day >= self.start && day <= self.end
    }

    /// Parses `YYYY-MM-DD:YYYY-MM-DD`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("window {s:?} is not START:END")))?;
        let parse = |d: &str| {
            NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d")
                .map_err(|e| Error::invalid(format!("bad date {d:?}: {e}")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

impl Default for StudyWindow {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2020, 1, 21).unwrap(),
            end: NaiveDate::from_ymd_opt(2020, 5, 1).unwrap(),
        }
    }
}

/// Maps the fields of an arbitrary JSON export onto the minimal record schema.
///
/// Keys may be dotted paths into nested objects, e.g. `user.id_str`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub id_key: String,
    pub user_key: String,
    pub created_at_key: String,
    pub text_key: String,
    pub urls_key: String,
    pub hashtags_key: String,
    pub retweeted_user_key: String,
    pub location_key: String,
    pub window: StudyWindow,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            id_key: "id".into(),
            user_key: "user_id".into(),
            created_at_key: "created_at".into(),
            text_key: "text".into(),
            urls_key: "urls".into(),
            hashtags_key: "hashtags".into(),
            retweeted_user_key: "retweeted_user_id".into(),
            location_key: "user_location".into(),
            window: StudyWindow::default(),
        }
    }
}

/// Serialized form of one input line in the default schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub user_id: String,
    pub created_at: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub urls: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hashtags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_user_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_location: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub parsed: u64,
    pub malformed: u64,
    pub out_of_window: u64,
}

impl ParseStats {
    pub fn merge(&mut self, other: &ParseStats) {
        self.parsed += other.parsed;
        self.malformed += other.malformed;
        self.out_of_window += other.out_of_window;
    }

    pub fn total(&self) -> u64 {
        self.parsed + self.malformed + self.out_of_window
    }
}

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#([\p{L}\p{N}_]+)").unwrap())
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bhttps?://\S+").unwrap())
}

fn retweet_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^RT @([A-Za-z0-9_]+)").unwrap())
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| cur.get(key))
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Strips the leading '#' and lowercases. Returns `None` for empty or
/// whitespace-containing tags.
pub fn normalize_hashtag(raw: &str) -> Option<String> {
    let tag = raw.trim().trim_start_matches('#').to_lowercase();
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        None
    } else {
        Some(tag)
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    // classic platform export format
    DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y")
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

fn string_list(v: Option<&Value>, object_keys: &[&str]) -> Option<Vec<String>> {
    let arr = v?.as_array()?;
    Some(
        arr.iter()
            .filter_map(|item| match item {
                Value::String(s) => Some(s.clone()),
                Value::Object(_) => object_keys
                    .iter()
                    .find_map(|k| item.get(*k).and_then(Value::as_str).map(str::to_owned)),
                _ => None,
            })
            .collect(),
    )
}

/// Parses one input line. Returns `None` (and bumps the matching counter)
/// for malformed or out-of-window records.
pub fn parse_tweet_line(
    line: &str,
    schema: &SchemaConfig,
    gazetteer: &Gazetteer,
    stats: &mut ParseStats,
) -> Option<TweetRecord> {
    let value: Value = match serde_json::from_str(line) {
        Ok(v @ Value::Object(_)) => v,
        _ => {
            stats.malformed += 1;
            return None;
        }
    };
    let field = |key: &str| lookup(&value, key).and_then(scalar_string);

    let (Some(user_id), Some(timestamp)) = (
        field(&schema.user_key),
        lookup(&value, &schema.created_at_key)
            .and_then(Value::as_str)
            .and_then(parse_timestamp),
    ) else {
        stats.malformed += 1;
        return None;
    };
    if !schema.window.contains(&timestamp) {
        stats.out_of_window += 1;
        return None;
    }

    let text = lookup(&value, &schema.text_key)
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_owned();
    let tweet_id = field(&schema.id_key).unwrap_or_default();

    let hashtags = match string_list(lookup(&value, &schema.hashtags_key), &["text", "tag"]) {
        Some(tags) => tags.iter().filter_map(|t| normalize_hashtag(t)).collect(),
        None => hashtag_re()
            .captures_iter(&text)
            .filter_map(|c| normalize_hashtag(&c[1]))
            .collect(),
    };
    let urls = string_list(lookup(&value, &schema.urls_key), &["expanded_url", "url"])
        .unwrap_or_else(|| {
            url_re()
                .find_iter(&text)
                .map(|m| m.as_str().to_owned())
                .collect()
        });
    let retweeted_user_id = field(&schema.retweeted_user_key).or_else(|| {
        retweet_re()
            .captures(&text)
            .map(|c| c[1].to_owned())
    });
    let state = lookup(&value, &schema.location_key)
        .and_then(Value::as_str)
        .and_then(|loc| match_state(loc, gazetteer));

    stats.parsed += 1;
    Some(TweetRecord {
        tweet_id,
        user_id,
        timestamp,
        text,
        hashtags,
        urls,
        retweeted_user_id,
        state,
    })
}

// Multi-label public suffixes recognised when reducing a host to its
// registrable domain. Anything else falls back to the last two labels.
const MULTI_LABEL_SUFFIXES: &[&str] = &[
    "ac.uk", "co.uk", "gov.uk", "ltd.uk", "me.uk", "net.uk", "nhs.uk", "org.uk", "plc.uk",
    "sch.uk", "com.au", "edu.au", "gov.au", "net.au", "org.au", "co.nz", "govt.nz", "org.nz",
    "co.jp", "ne.jp", "or.jp", "ac.jp", "co.in", "gov.in", "org.in", "com.br", "gov.br",
    "com.cn", "gov.cn", "com.mx", "gob.mx", "co.za", "gov.za", "com.sg", "gov.sg", "co.il",
    "co.kr", "com.tr", "com.ar", "ac.in", "edu.cn",
];

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && !label.starts_with('-')
        && !label.ends_with('-')
        && label.chars().all(|c| c.is_alphanumeric() || c == '-')
}

/// Reduces a URL (or bare host) to its lowercased registrable domain.
///
/// Drops scheme, userinfo, port, path, query and fragment. Returns `None`
/// for anything that does not look like a DNS host (including IP literals).
pub fn extract_domain(url: &str) -> Option<String> {
    let s = url.trim();
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return None;
    }
    let lower = s.to_lowercase();
    let rest = match lower.find("://") {
        Some(i) => {
            let scheme = &lower[..i];
            if scheme.is_empty()
                || !scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
            {
                return None;
            }
            &lower[i + 3..]
        }
        None => lower.trim_start_matches("//"),
    };
    let authority = rest.split(['/', '?', '#']).next()?;
    let host_port = authority.rsplit('@').next()?;
    let host = match host_port.rsplit_once(':') {
        Some((h, port)) if port.chars().all(|c| c.is_ascii_digit()) => h,
        Some(_) => return None,
        None => host_port,
    };
    let host = host.trim_end_matches('.');
    let labels: Vec<&str> = host.split('.').collect();
    if labels.len() < 2 || !labels.iter().all(|l| valid_label(l)) {
        return None;
    }
    let tld = labels[labels.len() - 1];
    if !tld.chars().any(char::is_alphabetic) {
        return None;
    }
    let n = labels.len();
    let last_two = format!("{}.{}", labels[n - 2], labels[n - 1]);
    if n >= 3 && MULTI_LABEL_SUFFIXES.contains(&last_two.as_str()) {
        Some(format!("{}.{}", labels[n - 3], last_two))
    } else {
        Some(last_two)
    }
}

const US_STATES: &[(&str, &str)] = &[
    ("AL", "Alabama"), ("AK", "Alaska"), ("AZ", "Arizona"), ("AR", "Arkansas"),
    ("CA", "California"), ("CO", "Colorado"), ("CT", "Connecticut"), ("DE", "Delaware"),
    ("DC", "District of Columbia"), ("FL", "Florida"), ("GA", "Georgia"), ("HI", "Hawaii"),
    ("ID", "Idaho"), ("IL", "Illinois"), ("IN", "Indiana"), ("IA", "Iowa"),
    ("KS", "Kansas"), ("KY", "Kentucky"), ("LA", "Louisiana"), ("ME", "Maine"),
    ("MD", "Maryland"), ("MA", "Massachusetts"), ("MI", "Michigan"), ("MN", "Minnesota"),
    ("MS", "Mississippi"), ("MO", "Missouri"), ("MT", "Montana"), ("NE", "Nebraska"),
    ("NV", "Nevada"), ("NH", "New Hampshire"), ("NJ", "New Jersey"), ("NM", "New Mexico"),
    ("NY", "New York"), ("NC", "North Carolina"), ("ND", "North Dakota"), ("OH", "Ohio"),
    ("OK", "Oklahoma"), ("OR", "Oregon"), ("PA", "Pennsylvania"), ("RI", "Rhode Island"),
    ("SC", "South Carolina"), ("SD", "South Dakota"), ("TN", "Tennessee"), ("TX", "Texas"),
    ("UT", "Utah"), ("VT", "Vermont"), ("VA", "Virginia"), ("WA", "Washington"),
    ("WV", "West Virginia"), ("WI", "Wisconsin"), ("WY", "Wyoming"),
];

/// State names and codes used to geolocate free-text profile locations.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    /// Lowercased name tokens → code, longest names first.
    names: Vec<(Vec<String>, String)>,
    codes: BTreeSet<String>,
}

impl Gazetteer {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut names = Vec::new();
        let mut codes = BTreeSet::new();
        for (code, name) in entries {
            let code = code.to_uppercase();
            names.push((word_tokens(name).into_iter().map(|(l, _)| l).collect(), code.clone()));
            codes.insert(code);
        }
        names.sort_by(|a: &(Vec<String>, String), b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        Self { names, codes }
    }

    pub fn us_states() -> Self {
        Self::from_entries(US_STATES.iter().copied())
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(String::as_str)
    }
}

impl Default for Gazetteer {
    fn default() -> Self {
        Self::us_states()
    }
}

fn word_tokens(s: &str) -> Vec<(String, String)> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| (w.to_lowercase(), w.to_owned()))
        .collect()
}

/// Resolves a profile location to a unique state code.
///
/// Full names match case-insensitively on word boundaries, longest name
/// first ("West Virginia" never also yields "Virginia"). Two-letter codes
/// match only when written in uppercase. Zero or several distinct states
/// yield `None`.
pub fn match_state(location: &str, gazetteer: &Gazetteer) -> Option<String> {
    let tokens = word_tokens(location);
    let mut found = BTreeSet::new();
    let mut i = 0;
    while i < tokens.len() {
        let name_hit = gazetteer.names.iter().find(|(words, _)| {
            tokens.len() - i >= words.len()
                && words.iter().zip(&tokens[i..]).all(|(w, (t, _))| w == t)
        });
        if let Some((words, code)) = name_hit {
            found.insert(code.clone());
            i += words.len();
            continue;
        }
        let (_, original) = &tokens[i];
        if original.len() == 2
            && original.chars().all(|c| c.is_ascii_uppercase())
            && gazetteer.codes.contains(original)
        {
            found.insert(original.clone());
        }
        i += 1;
    }
    if found.len() == 1 {
        found.into_iter().next()
    } else {
        None
    }
}

/// Everything the pipeline keeps about one user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserAggregate {
    pub user_id: String,
    /// Tweet texts in (timestamp, tweet id) order, newline separated.
    pub doc_text: String,
    pub hashtag_counts: BTreeMap<String, u32>,
    pub shared_domains: BTreeMap<String, u32>,
    pub state: Option<String>,
    /// 1-based bucket index → domains shared in that bucket.
    pub per_bucket_domains: BTreeMap<usize, BTreeMap<String, u32>>,
    /// 1-based bucket index → number of tweets posted in that bucket.
    pub tweets_per_bucket: BTreeMap<usize, u32>,
    pub n_tweets: u32,
}

#[derive(Debug, Default, Clone)]
struct PartialUser {
    texts: Vec<(DateTime<Utc>, String, String)>,
    hashtag_counts: BTreeMap<String, u32>,
    shared_domains: BTreeMap<String, u32>,
    state_votes: BTreeMap<String, u32>,
    per_bucket_domains: BTreeMap<usize, BTreeMap<String, u32>>,
    tweets_per_bucket: BTreeMap<usize, u32>,
    n_tweets: u32,
}

fn add_counts<K: Ord + Clone>(into: &mut BTreeMap<K, u32>, from: &BTreeMap<K, u32>) {
    for (k, v) in from {
        *into.entry(k.clone()).or_default() += v;
    }
}

impl PartialUser {
    fn merge(&mut self, other: PartialUser) {
        self.texts.extend(other.texts);
        add_counts(&mut self.hashtag_counts, &other.hashtag_counts);
        add_counts(&mut self.shared_domains, &other.shared_domains);
        add_counts(&mut self.state_votes, &other.state_votes);
        for (b, doms) in &other.per_bucket_domains {
            add_counts(self.per_bucket_domains.entry(*b).or_default(), doms);
        }
        add_counts(&mut self.tweets_per_bucket, &other.tweets_per_bucket);
        self.n_tweets += other.n_tweets;
    }

    fn finish(mut self, user_id: String) -> UserAggregate {
        self.texts.sort();
        let doc_text = self
            .texts
            .iter()
            .map(|(_, _, t)| t.trim())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join("\n");
        // most frequent state, ties to the smallest code
        let state = self
            .state_votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(s, _)| s.clone());
        UserAggregate {
            user_id,
            doc_text,
            hashtag_counts: self.hashtag_counts,
            shared_domains: self.shared_domains,
            state,
            per_bucket_domains: self.per_bucket_domains,
            tweets_per_bucket: self.tweets_per_bucket,
            n_tweets: self.n_tweets,
        }
    }
}

/// Incremental, mergeable per-user aggregation.
///
/// Merging is associative and commutative, so shards may be aggregated
/// independently and combined in any order.
#[derive(Debug, Clone)]
pub struct AggregateBuilder {
    buckets: BiweeklySpec,
    users: HashMap<String, PartialUser>,
}

impl AggregateBuilder {
    pub fn new(buckets: BiweeklySpec) -> Self {
        Self {
            buckets,
            users: HashMap::new(),
        }
    }

    pub fn push(&mut self, record: &TweetRecord) {
        let bucket = self.buckets.bucket_of(&record.timestamp);
        let user = self.users.entry(record.user_id.clone()).or_default();
        user.n_tweets += 1;
        user.texts.push((record.timestamp, record.tweet_id.clone(), record.text.clone()));
        for tag in &record.hashtags {
            *user.hashtag_counts.entry(tag.clone()).or_default() += 1;
        }
        if let Some(b) = bucket {
            *user.tweets_per_bucket.entry(b).or_default() += 1;
        }
        for domain in record.urls.iter().filter_map(|u| extract_domain(u)) {
            if let Some(b) = bucket {
                *user
                    .per_bucket_domains
                    .entry(b)
                    .or_default()
                    .entry(domain.clone())
                    .or_default() += 1;
            }
            *user.shared_domains.entry(domain).or_default() += 1;
        }
        if let Some(state) = &record.state {
            *user.state_votes.entry(state.clone()).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: AggregateBuilder) {
        for (id, partial) in other.users {
            self.users.entry(id).or_default().merge(partial);
        }
    }

    pub fn finish(self) -> BTreeMap<String, UserAggregate> {
        self.users
            .into_iter()
            .map(|(id, p)| (id.clone(), p.finish(id)))
            .collect()
    }
}

pub fn aggregate_users<'a>(
    records: impl IntoIterator<Item = &'a TweetRecord>,
    buckets: &BiweeklySpec,
) -> BTreeMap<String, UserAggregate> {
    let mut builder = AggregateBuilder::new(buckets.clone());
    for r in records {
        builder.push(r);
    }
    builder.finish()
}

/// Output of the ingest stage: user aggregates plus the tweet-level data
/// later stages need (per-tweet hashtag sets, retweet pairs).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusBundle {
    pub window: Option<StudyWindow>,
    pub buckets: BiweeklySpec,
    pub stats: ParseStats,
    /// Sorted by user id.
    pub users: Vec<UserAggregate>,
    /// Distinct hashtags of every tweet carrying at least two.
    pub tweet_hashtags: Vec<Vec<String>>,
    /// (retweeter, retweeted) per retweet.
    pub retweets: Vec<(String, String)>,
}

struct Shard {
    stats: ParseStats,
    builder: AggregateBuilder,
    tweet_hashtags: Vec<Vec<String>>,
    retweets: Vec<(String, String)>,
}

fn ingest_shard(
    lines: &[String],
    schema: &SchemaConfig,
    gazetteer: &Gazetteer,
    buckets: &BiweeklySpec,
) -> Shard {
    let mut shard = Shard {
        stats: ParseStats::default(),
        builder: AggregateBuilder::new(buckets.clone()),
        tweet_hashtags: Vec::new(),
        retweets: Vec::new(),
    };
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let Some(record) = parse_tweet_line(line, schema, gazetteer, &mut shard.stats) else {
            continue;
        };
        let tags: BTreeSet<&String> = record.hashtags.iter().collect();
        if tags.len() >= 2 {
            shard.tweet_hashtags.push(tags.into_iter().cloned().collect());
        }
        if let Some(dst) = &record.retweeted_user_id {
            shard.retweets.push((record.user_id.clone(), dst.clone()));
        }
        shard.builder.push(&record);
    }
    shard
}

const SHARD_LINES: usize = 16_384;

impl CorpusBundle {
    /// Parses and aggregates a whole corpus. Shards are processed in
    /// parallel and merged in input order, so the result is deterministic.
    pub fn ingest<R: BufRead>(
        reader: R,
        schema: &SchemaConfig,
        gazetteer: &Gazetteer,
        buckets: &BiweeklySpec,
    ) -> std::io::Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let shards: Vec<Shard> = lines
            .par_chunks(SHARD_LINES)
            .map(|chunk| ingest_shard(chunk, schema, gazetteer, buckets))
            .collect();

        let mut stats = ParseStats::default();
        let mut builder = AggregateBuilder::new(buckets.clone());
        let mut tweet_hashtags = Vec::new();
        let mut retweets = Vec::new();
        for shard in shards {
            stats.merge(&shard.stats);
            builder.merge(shard.builder);
            tweet_hashtags.extend(shard.tweet_hashtags);
            retweets.extend(shard.retweets);
        }
        Ok(Self {
            window: Some(schema.window),
            buckets: buckets.clone(),
            stats,
            users: builder.finish().into_values().collect(),
            tweet_hashtags,
            retweets,
        })
    }

    pub fn ingest_path(
        path: &Path,
        schema: &SchemaConfig,
        gazetteer: &Gazetteer,
        buckets: &BiweeklySpec,
    ) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::ingest(std::io::BufReader::new(file), schema, gazetteer, buckets)
            .map_err(|e| Error::io(path, e))
    }

    pub fn user_map(&self) -> BTreeMap<&str, &UserAggregate> {
        self.users.iter().map(|u| (u.user_id.as_str(), u)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(line: &str) -> (Option<TweetRecord>, ParseStats) {
        let mut stats = ParseStats::default();
        let r = parse_tweet_line(line, &SchemaConfig::default(), &Gazetteer::default(), &mut stats);
        (r, stats)
    }

    fn record(user: &str, ts: &str, tags: &[&str], urls: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: format!("{user}-{ts}"),
            user_id: user.into(),
            timestamp: DateTime::parse_from_rfc3339(ts).unwrap().with_timezone(&Utc),
            text: format!("tweet at {ts}"),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            urls: urls.iter().map(|s| s.to_string()).collect(),
            retweeted_user_id: None,
            state: None,
        }
    }

    #[test]
    fn parses_text_derived_fields() {
        let line = r#"{"id":"1","user_id":"u1","created_at":"2020-03-02T10:00:00Z","text":"RT @who Wash hands #StayHome https://cdc.gov/x"}"#;
        let (r, stats) = parse(line);
        let r = r.unwrap();
        assert_eq!(r.hashtags, vec!["stayhome"]);
        assert_eq!(r.urls, vec!["https://cdc.gov/x"]);
        assert_eq!(r.retweeted_user_id.as_deref(), Some("who"));
        assert_eq!(stats.parsed, 1);
    }

    #[test]
    fn explicit_fields_win_over_text() {
        let line = r##"{"id":7,"user_id":42,"created_at":"2020-03-02T10:00:00Z","text":"#Ignored","hashtags":["#Masks","Covid19"],"urls":[{"expanded_url":"https://who.int"}],"retweeted_user_id":"99","user_location":"Austin, Texas"}"##;
        let r = parse(line).0.unwrap();
        assert_eq!(r.user_id, "42");
        assert_eq!(r.tweet_id, "7");
        assert_eq!(r.hashtags, vec!["masks", "covid19"]);
        assert_eq!(r.urls, vec!["https://who.int"]);
        assert_eq!(r.retweeted_user_id.as_deref(), Some("99"));
        assert_eq!(r.state.as_deref(), Some("TX"));
    }

    #[test]
    fn skips_missing_user_and_bad_json() {
        let (r, stats) = parse(r#"{"id":"1","created_at":"2020-03-02T10:00:00Z","text":"x"}"#);
        assert!(r.is_none());
        assert_eq!(stats.malformed, 1);
        let (r, stats) = parse("{not json");
        assert!(r.is_none());
        assert_eq!(stats.malformed, 1);
        let (r, stats) = parse(r#"{"id":"1","user_id":"u","created_at":"yesterday","text":"x"}"#);
        assert!(r.is_none());
        assert_eq!(stats.malformed, 1);
    }

    #[test]
    fn skips_out_of_window() {
        let (r, stats) = parse(r#"{"id":"1","user_id":"u","created_at":"2019-12-01T00:00:00Z","text":"x"}"#);
        assert!(r.is_none());
        assert_eq!(stats.out_of_window, 1);
        assert_eq!(stats.malformed, 0);
        // the end date is inclusive
        assert!(parse(r#"{"id":"1","user_id":"u","created_at":"2020-05-01T23:59:59Z","text":"x"}"#).0.is_some());
    }

    #[test]
    fn nested_schema_paths() {
        let schema = SchemaConfig {
            user_key: "user.id_str".into(),
            ..SchemaConfig::default()
        };
        let mut stats = ParseStats::default();
        let line = r#"{"id":"1","user":{"id_str":"abc"},"created_at":"Mon Mar 02 10:00:00 +0000 2020","text":"hi"}"#;
        let r = parse_tweet_line(line, &schema, &Gazetteer::default(), &mut stats).unwrap();
        assert_eq!(r.user_id, "abc");
    }

    #[test]
    fn domain_extraction() {
        assert_eq!(extract_domain("https://www.cdc.gov/covid").as_deref(), Some("cdc.gov"));
        assert_eq!(
            extract_domain("http://prison-planet.com:80/a?b=1").as_deref(),
            Some("prison-planet.com")
        );
        assert_eq!(extract_domain("not a url"), None);
        assert_eq!(extract_domain("https://news.bbc.co.uk/x").as_deref(), Some("bbc.co.uk"));
        assert_eq!(extract_domain("WHO.int").as_deref(), Some("who.int"));
        assert_eq!(extract_domain("http://192.168.0.1/x"), None);
        assert_eq!(extract_domain("https://user@host.example.org:8080").as_deref(), Some("example.org"));
        assert_eq!(extract_domain("localhost"), None);
        assert_eq!(extract_domain(""), None);
    }

    #[test]
    fn state_matching() {
        let g = Gazetteer::default();
        assert_eq!(match_state("Los Angeles, CA", &g).as_deref(), Some("CA"));
        assert_eq!(match_state("Kansas City, Missouri and Kansas", &g), None);
        assert_eq!(match_state("somewhere on Earth", &g), None);
        assert_eq!(match_state("Charleston, West Virginia", &g).as_deref(), Some("WV"));
        assert_eq!(match_state("new york, NY", &g).as_deref(), Some("NY"));
        assert_eq!(match_state("living in texas", &g).as_deref(), Some("TX"));
    }

    #[test]
    fn aggregation_counts_and_buckets() {
        let spec = BiweeklySpec::default();
        let records = vec![
            record("u1", "2020-01-25T12:00:00Z", &["covid"], &["https://cdc.gov/a"]),
            record("u1", "2020-04-20T12:00:00Z", &["covid"], &["https://www.who.int/b"]),
            record("u2", "2020-02-02T12:00:00Z", &[], &[]),
        ];
        let aggs = aggregate_users(&records, &spec);
        let u1 = &aggs["u1"];
        assert_eq!(u1.hashtag_counts["covid"], 2);
        assert_eq!(u1.per_bucket_domains.keys().copied().collect::<Vec<_>>(), vec![1, 7]);
        assert_eq!(u1.shared_domains.len(), 2);
        assert!(aggs["u2"].shared_domains.is_empty());
        assert_eq!(aggs["u2"].tweets_per_bucket[&2], 1);
    }

    #[test]
    fn ingest_counts_everything() {
        let lines = [
            r#"{"id":"1","user_id":"a","created_at":"2020-02-02T00:00:00Z","text":"RT @b #x #y"}"#,
            r#"{"id":"2","user_id":"b","created_at":"2020-02-03T00:00:00Z","text":"hello"}"#,
            r#"garbage"#,
            r#"{"id":"3","user_id":"b","created_at":"2021-02-03T00:00:00Z","text":"late"}"#,
        ]
        .join("\n");
        let bundle = CorpusBundle::ingest(
            lines.as_bytes(),
            &SchemaConfig::default(),
            &Gazetteer::default(),
            &BiweeklySpec::default(),
        )
        .unwrap();
        assert_eq!(bundle.stats, ParseStats { parsed: 2, malformed: 1, out_of_window: 1 });
        assert_eq!(bundle.users.len(), 2);
        assert_eq!(bundle.retweets, vec![("a".to_string(), "b".to_string())]);
        assert_eq!(bundle.tweet_hashtags, vec![vec!["x".to_string(), "y".to_string()]]);
    }

    fn arb_record() -> impl Strategy<Value = TweetRecord> {
        (
            0..5u8,
            0..100i64,
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..4),
            prop::collection::vec(prop::sample::select(vec!["https://cdc.gov", "who.int/x", "bad url"]), 0..3),
            any::<u32>(),
        )
            .prop_map(|(u, day, tags, urls, id)| {
                let ts = DateTime::parse_from_rfc3339("2020-01-21T00:00:00Z").unwrap().with_timezone(&Utc)
                    + chrono::Duration::hours(day * 24);
                TweetRecord {
                    tweet_id: id.to_string(),
                    user_id: format!("u{u}"),
                    timestamp: ts,
                    text: format!("text {id}"),
                    hashtags: tags.into_iter().map(String::from).collect(),
                    urls: urls.into_iter().map(String::from).collect(),
                    retweeted_user_id: None,
                    state: None,
                }
            })
    }

    proptest! {
        #[test]
        fn aggregation_is_order_independent_and_conserves_hashtags(
            mut records in prop::collection::vec(arb_record(), 0..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let spec = BiweeklySpec::default();
            let a = aggregate_users(&records, &spec);
            let total: usize = records.iter().map(|r| r.hashtags.len()).sum();
            let summed: u32 = a.values().flat_map(|u| u.hashtag_counts.values()).sum();
            prop_assert_eq!(total as u32, summed);

            records.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = aggregate_users(&records, &spec);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn domain_extraction_is_idempotent(host in "[a-z]{1,8}(\\.[a-z]{2,5}){1,3}", path in "(/[a-z0-9]{0,5}){0,3}") {
            let url = format!("https://{host}{path}");
            if let Some(d) = extract_domain(&url) {
                prop_assert_eq!(extract_domain(&d), Some(d.clone()));
                prop_assert_eq!(extract_domain(&format!("http://{d}/z")), Some(d));
            }
        }
    }
}
