//! Timeline loading, cleaning, chunking, and top-k selection.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedLine {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: unknown label {label:?}")]
    UnknownLabel {
        path: String,
        line: usize,
        label: String,
    },
    #[error("account {handle}: duplicate tweet id {id}")]
    DuplicateTweetId { handle: String, id: String },
    #[error("account {handle}: conflicting labels {a:?} and {b:?}")]
    ConflictingLabels {
        handle: String,
        a: AccountLabel,
        b: AccountLabel,
    },
    #[error("account {handle}: no tweets left after cleaning")]
    EmptyAfterCleaning { handle: String },
}

/// The four account classes, in fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountLabel {
    Propaganda,
    Clickbait,
    Hoax,
    Real,
}

pub const LABELS: [AccountLabel; 4] = [
    AccountLabel::Propaganda,
    AccountLabel::Clickbait,
    AccountLabel::Hoax,
    AccountLabel::Real,
];

impl AccountLabel {
    pub fn index(self) -> usize {
        LABELS.iter().position(|&l| l == self).unwrap()
    }

    pub fn from_index(i: usize) -> Self {
        LABELS[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccountLabel::Propaganda => "propaganda",
            AccountLabel::Clickbait => "clickbait",
            AccountLabel::Hoax => "hoax",
            AccountLabel::Real => "real",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "propaganda" => Some(AccountLabel::Propaganda),
            "clickbait" => Some(AccountLabel::Clickbait),
            "hoax" => Some(AccountLabel::Hoax),
            "real" => Some(AccountLabel::Real),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    /// UTC instant, unix seconds.
    pub timestamp: i64,
    pub reply_count: u64,
    pub like_count: u64,
    pub retweet_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub handle: String,
    pub label: AccountLabel,
    pub tweets: Vec<Tweet>,
}

/// A fixed-length, chronologically contiguous block of tweets from one account.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub account_handle: String,
    pub index: usize,
    pub tweets: Vec<Tweet>,
    pub label: AccountLabel,
}

/// One JSON line of the timeline file format.
#[derive(Debug, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub id: String,
    pub account: String,
    pub label: String,
    pub text: String,
    pub created_at: String,
    pub replies: i64,
    pub likes: i64,
    pub retweets: i64,
}

/// Load newline-delimited timeline records, grouping tweets by account handle.
/// Accounts come back sorted by handle.
pub fn load_corpus(path: &Path) -> Result<Vec<Account>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);

    let mut accounts: BTreeMap<String, Account> = BTreeMap::new();
    let mut seen_ids: BTreeMap<String, HashSet<String>> = BTreeMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| CorpusError::MalformedLine {
            path: path.display().to_string(),
            line: lineno,
            reason,
        };
        let rec: TimelineRecord =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if rec.id.is_empty() {
            return Err(malformed("empty tweet id".into()));
        }
        if rec.replies < 0 || rec.likes < 0 || rec.retweets < 0 {
            return Err(malformed("negative engagement count".into()));
        }
        let label = AccountLabel::parse(&rec.label).ok_or_else(|| CorpusError::UnknownLabel {
            path: path.display().to_string(),
            line: lineno,
            label: rec.label.clone(),
        })?;
        let timestamp = OffsetDateTime::parse(&rec.created_at, &Rfc3339)
            .map_err(|e| malformed(format!("bad created_at {:?}: {e}", rec.created_at)))?
            .unix_timestamp();

        let ids = seen_ids.entry(rec.account.clone()).or_default();
        if !ids.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateTweetId {
                handle: rec.account,
                id: rec.id,
            });
        }

        let tweet = Tweet {
            id: rec.id,
            text: rec.text,
            timestamp,
            reply_count: rec.replies as u64,
            like_count: rec.likes as u64,
            retweet_count: rec.retweets as u64,
        };
        match accounts.get_mut(&rec.account) {
            Some(acc) => {
                if acc.label != label {
                    return Err(CorpusError::ConflictingLabels {
                        handle: rec.account,
                        a: acc.label,
                        b: label,
                    });
                }
                acc.tweets.push(tweet);
            }
            None => {
                accounts.insert(
                    rec.account.clone(),
                    Account {
                        handle: rec.account,
                        label,
                        tweets: vec![tweet],
                    },
                );
            }
        }
    }

    Ok(accounts.into_values().collect())
}

/// Serialize accounts back to the newline-delimited timeline format.
pub fn write_corpus(accounts: &[Account], out: &mut impl std::io::Write) -> std::io::Result<()> {
    for acc in accounts {
        for tw in &acc.tweets {
            let ts = OffsetDateTime::from_unix_timestamp(tw.timestamp)
                .expect("valid timestamp")
                .format(&Rfc3339)
                .expect("rfc3339 format");
            let rec = TimelineRecord {
                id: tw.id.clone(),
                account: acc.handle.clone(),
                label: acc.label.as_str().to_string(),
                text: tw.text.clone(),
                created_at: ts,
                replies: tw.reply_count as i64,
                likes: tw.like_count as i64,
                retweets: tw.retweet_count as i64,
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Lowercase, strip URL tokens, collapse whitespace. Used only for duplicate
/// and link-only detection.
fn normalize_for_dedup(text: &str) -> String {
    text.split_whitespace()
        .filter(|tok| !is_url_token(tok))
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn is_url_token(tok: &str) -> bool {
    let t = tok.to_ascii_lowercase();
    t.starts_with("http://") || t.starts_with("https://")
}

/// Remove duplicate, link-only, and media-only tweets. Order preserved, first
/// occurrence of a duplicate kept.
pub fn clean_account(account: &Account) -> Result<Account, CorpusError> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut kept = Vec::new();
    for tw in &account.tweets {
        let norm = normalize_for_dedup(&tw.text);
        if norm.is_empty() {
            // link-only or media-only: nothing but URLs / placeholders
            continue;
        }
        if seen.insert(norm) {
            kept.push(tw.clone());
        }
    }
    if kept.is_empty() {
        return Err(CorpusError::EmptyAfterCleaning {
            handle: account.handle.clone(),
        });
    }
    Ok(Account {
        handle: account.handle.clone(),
        label: account.label,
        tweets: kept,
    })
}

/// Result of chunking one account.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkingOutcome {
    pub chunks: Vec<Chunk>,
    /// Tweets in the trailing remainder that was dropped.
    pub dropped: usize,
}

/// Sort tweets ascending by timestamp (ties by id) and split into consecutive
/// chunks of exactly `chunk_size`; the trailing remainder is dropped.
pub fn chunk_timeline(account: &Account, chunk_size: usize) -> ChunkingOutcome {
    assert!(chunk_size >= 1, "chunk_size must be >= 1");
    let mut tweets = account.tweets.clone();
    tweets.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));

    let n_chunks = tweets.len() / chunk_size;
    let dropped = tweets.len() - n_chunks * chunk_size;
    let chunks = (0..n_chunks)
        .map(|i| Chunk {
            account_handle: account.handle.clone(),
            index: i,
            tweets: tweets[i * chunk_size..(i + 1) * chunk_size].to_vec(),
            label: account.label,
        })
        .collect();
    ChunkingOutcome { chunks, dropped }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngagementMetric {
    Replies,
    Likes,
    Retweets,
}

impl EngagementMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            EngagementMetric::Replies => "replies",
            EngagementMetric::Likes => "likes",
            EngagementMetric::Retweets => "retweets",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "replies" => Some(EngagementMetric::Replies),
            "likes" => Some(EngagementMetric::Likes),
            "retweets" => Some(EngagementMetric::Retweets),
            _ => None,
        }
    }

    fn value(self, tw: &Tweet) -> u64 {
        match self {
            EngagementMetric::Replies => tw.reply_count,
            EngagementMetric::Likes => tw.like_count,
            EngagementMetric::Retweets => tw.retweet_count,
        }
    }
}

/// Top `k` tweets by the given engagement metric, ties broken by timestamp
/// then id ascending. Output sorted by metric descending.
pub fn select_top_k(account: &Account, metric: EngagementMetric, k: usize) -> Vec<Tweet> {
    assert!(k >= 1, "k must be >= 1");
    let mut tweets = account.tweets.clone();
    tweets.sort_by(|a, b| {
        metric
            .value(b)
            .cmp(&metric.value(a))
            .then_with(|| a.timestamp.cmp(&b.timestamp))
            .then_with(|| a.id.cmp(&b.id))
    });
    tweets.truncate(k);
    tweets
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tweet(id: &str, text: &str, ts: i64) -> Tweet {
        Tweet {
            id: id.into(),
            text: text.into(),
            timestamp: ts,
            reply_count: 0,
            like_count: 0,
            retweet_count: 0,
        }
    }

    fn account(texts: &[&str]) -> Account {
        Account {
            handle: "a".into(),
            label: AccountLabel::Propaganda,
            tweets: texts
                .iter()
                .enumerate()
                .map(|(i, t)| tweet(&format!("t{i}"), t, i as i64))
                .collect(),
        }
    }

    #[test]
    fn clean_removes_duplicates_and_link_only() {
        let acc = account(&["hi", "hi", "http://x.co"]);
        let cleaned = clean_account(&acc).unwrap();
        assert_eq!(cleaned.tweets.len(), 1);
        assert_eq!(cleaned.tweets[0].text, "hi");
    }

    #[test]
    fn clean_keeps_text_with_trailing_url() {
        let acc = account(&["A http://x.co"]);
        let cleaned = clean_account(&acc).unwrap();
        assert_eq!(cleaned.tweets.len(), 1);
    }

    #[test]
    fn clean_case_insensitive_duplicates() {
        let acc = account(&["Hi!", "hi!"]);
        let cleaned = clean_account(&acc).unwrap();
        assert_eq!(cleaned.tweets.len(), 1);
        assert_eq!(cleaned.tweets[0].text, "Hi!");
    }

    #[test]
    fn clean_is_idempotent() {
        let acc = account(&["x y", "x  Y", "b http://u.rl", "b"]);
        let once = clean_account(&acc).unwrap();
        let twice = clean_account(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn clean_errors_on_empty_result() {
        let acc = account(&["http://x.co", "https://y.co"]);
        assert!(matches!(
            clean_account(&acc),
            Err(CorpusError::EmptyAfterCleaning { .. })
        ));
    }

    #[test]
    fn chunking_exact_and_remainder() {
        let mk = |m: usize| Account {
            handle: "a".into(),
            label: AccountLabel::Hoax,
            tweets: (0..m)
                .map(|i| tweet(&format!("t{i:04}"), "x", i as i64))
                .collect(),
        };
        let out = chunk_timeline(&mk(100), 20);
        assert_eq!(out.chunks.len(), 5);
        assert_eq!(out.dropped, 0);

        let out = chunk_timeline(&mk(33), 20);
        assert_eq!(out.chunks.len(), 1);
        assert_eq!(out.dropped, 13);

        let out = chunk_timeline(&mk(19), 20);
        assert!(out.chunks.is_empty());
        assert_eq!(out.dropped, 19);
    }

    #[test]
    fn chunking_sorts_by_timestamp_then_id() {
        let acc = Account {
            handle: "a".into(),
            label: AccountLabel::Real,
            tweets: vec![tweet("b", "2", 5), tweet("a", "1", 5), tweet("c", "0", 1)],
        };
        let out = chunk_timeline(&acc, 3);
        let ids: Vec<_> = out.chunks[0].tweets.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(out.chunks[0].label, AccountLabel::Real);
    }

    #[test]
    fn chunks_concatenate_to_sorted_truncated_timeline() {
        let acc = Account {
            handle: "a".into(),
            label: AccountLabel::Real,
            tweets: (0..23)
                .rev()
                .map(|i| tweet(&format!("t{i:02}"), "x", i as i64))
                .collect(),
        };
        let out = chunk_timeline(&acc, 5);
        let concat: Vec<_> = out
            .chunks
            .iter()
            .flat_map(|c| c.tweets.iter().map(|t| t.timestamp))
            .collect();
        assert_eq!(concat, (0..20).collect::<Vec<i64>>());
        assert_eq!(out.dropped, 3);
        assert!(out.chunks.iter().all(|c| c.tweets.len() == 5));
    }

    #[test]
    fn top_k_selects_by_metric() {
        let mut acc = account(&["a", "b", "c"]);
        acc.tweets[0].reply_count = 5;
        acc.tweets[1].reply_count = 1;
        acc.tweets[2].reply_count = 9;
        let top = select_top_k(&acc, EngagementMetric::Replies, 2);
        assert_eq!(top[0].reply_count, 9);
        assert_eq!(top[1].reply_count, 5);
    }

    #[test]
    fn top_k_larger_than_timeline_returns_all() {
        let acc = account(&["a", "b", "c"]);
        let top = select_top_k(&acc, EngagementMetric::Likes, 500);
        assert_eq!(top.len(), 3);
    }

    #[test]
    fn top_k_tie_prefers_earlier_timestamp() {
        let mut acc = account(&["a", "b"]);
        acc.tweets[0].reply_count = 7;
        acc.tweets[1].reply_count = 7;
        let top = select_top_k(&acc, EngagementMetric::Replies, 1);
        assert_eq!(top[0].id, "t0");
    }

    #[test]
    fn load_corpus_roundtrip_and_errors() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tl.jsonl");
        let mut f = File::create(&path).unwrap();
        for i in 0..3 {
            writeln!(
                f,
                r#"{{"id":"t{i}","account":"a","label":"propaganda","text":"hello {i}","created_at":"2019-01-0{}T00:00:00Z","replies":1,"likes":2,"retweets":3}}"#,
                i + 1
            )
            .unwrap();
        }
        drop(f);
        let accounts = load_corpus(&path).unwrap();
        assert_eq!(accounts.len(), 1);
        assert_eq!(accounts[0].tweets.len(), 3);
        assert_eq!(accounts[0].label, AccountLabel::Propaganda);

        let empty = dir.path().join("empty.jsonl");
        File::create(&empty).unwrap();
        assert!(load_corpus(&empty).unwrap().is_empty());

        let bad = dir.path().join("bad.jsonl");
        let mut f = File::create(&bad).unwrap();
        writeln!(
            f,
            r#"{{"id":"t","account":"a","label":"propaganda","text":"x","created_at":"2019-01-01T00:00:00Z","replies":1,"likes":-2,"retweets":3}}"#
        )
        .unwrap();
        drop(f);
        match load_corpus(&bad) {
            Err(CorpusError::MalformedLine { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected malformed line, got {other:?}"),
        }

        let unk = dir.path().join("unk.jsonl");
        let mut f = File::create(&unk).unwrap();
        writeln!(
            f,
            r#"{{"id":"t","account":"a","label":"satire","text":"x","created_at":"2019-01-01T00:00:00Z","replies":0,"likes":0,"retweets":0}}"#
        )
        .unwrap();
        drop(f);
        assert!(matches!(
            load_corpus(&unk),
            Err(CorpusError::UnknownLabel { .. })
        ));

        let dup = dir.path().join("dup.jsonl");
        let mut f = File::create(&dup).unwrap();
        for _ in 0..2 {
            writeln!(
                f,
                r#"{{"id":"t","account":"a","label":"real","text":"x","created_at":"2019-01-01T00:00:00Z","replies":0,"likes":0,"retweets":0}}"#
            )
            .unwrap();
        }
        drop(f);
        assert!(matches!(
            load_corpus(&dup),
            Err(CorpusError::DuplicateTweetId { .. })
        ));
    }
}
