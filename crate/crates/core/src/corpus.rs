//! Posts, week buckets and the vocabulary.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Text normalization applied to every token after lower-casing.
pub trait Stemmer {
    fn stem(&self, token: &str) -> String;
}

/// Leaves tokens untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityStemmer;

impl Stemmer for IdentityStemmer {
    fn stem(&self, token: &str) -> String {
        token.to_string()
    }
}

/// Strips the longest matching suffix from a fixed list of common Russian,
/// Ukrainian and English inflections, keeping a stem of at least
/// `min_stem_chars` characters.
#[derive(Debug, Clone)]
pub struct SuffixStemmer {
    suffixes: Vec<&'static str>,
    min_stem_chars: usize,
}

const DEFAULT_SUFFIXES: &[&str] = &[
    // Cyrillic noun/adjective/verb endings
    "иями", "ями", "ами", "ого", "его", "ому", "ему", "ыми", "ими", "ах", "ях", "ов", "ев",
    "ей", "ой", "ый", "ий", "ая", "яя", "ое", "ее", "ые", "ие", "ом", "ем", "ам", "ям",
    "ть", "ти", "ла", "ли", "ло", "а", "я", "ы", "и", "у", "ю", "е", "о", "ь",
    // Latin
    "ing", "edly", "ed", "es", "s",
];

impl Default for SuffixStemmer {
    fn default() -> Self {
        let mut suffixes = DEFAULT_SUFFIXES.to_vec();
        // longest first so the longest matching suffix wins
        suffixes.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
        Self {
            suffixes,
            min_stem_chars: 3,
        }
    }
}

impl Stemmer for SuffixStemmer {
    fn stem(&self, token: &str) -> String {
        let len = token.chars().count();
        for suf in &self.suffixes {
            let sl = suf.chars().count();
            if len >= sl + self.min_stem_chars && token.ends_with(suf) {
                return token[..token.len() - suf.len()].to_string();
            }
        }
        token.to_string()
    }
}

impl<F: Fn(&str) -> String> Stemmer for F {
    fn stem(&self, token: &str) -> String {
        self(token)
    }
}

fn is_url(token: &str) -> bool {
    let t = token.to_ascii_lowercase();
    t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.")
}

/// Characters kept inside tokens. Everything else acts as a separator.
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\''
}

/// Splits on whitespace, drops URLs, replaces punctuation with separators,
/// lower-cases and stems each token. Empty tokens are dropped.
pub fn tokenize_normalize<S: Stemmer + ?Sized>(text: &str, stemmer: &S) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        if is_url(raw) {
            continue;
        }
        for piece in raw.split(|c: char| !is_word_char(c)) {
            let piece = piece.trim_matches(|c| c == '-' || c == '\'');
            if piece.is_empty() {
                continue;
            }
            let stemmed = stemmer.stem(&piece.to_lowercase());
            if !stemmed.is_empty() {
                out.push(stemmed);
            }
        }
    }
    out
}

/// A single post after normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    /// UTC seconds.
    pub timestamp: i64,
    pub region: Option<String>,
    pub tokens: Vec<String>,
}

/// All posts that fall into one week.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekBucket {
    pub week_index: usize,
    pub posts: Vec<Post>,
}

impl WeekBucket {
    pub fn post_count(&self) -> usize {
        self.posts.len()
    }
}

/// Week layout of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekClock {
    pub origin: i64,
    pub week_len: i64,
}

impl WeekClock {
    pub const WEEK_SECONDS: i64 = 7 * 24 * 3600;

    pub fn new(origin: i64, week_len: i64) -> Result<Self> {
        if week_len <= 0 {
            return Err(Error::InvalidParameter(format!(
                "week length must be positive, got {week_len}"
            )));
        }
        Ok(Self { origin, week_len })
    }

    /// Week index of a timestamp, or `None` if it precedes the origin.
    pub fn week_of(&self, timestamp: i64) -> Option<usize> {
        if timestamp < self.origin {
            return None;
        }
        Some(((timestamp - self.origin) / self.week_len) as usize)
    }
}

/// Places posts into contiguous buckets `0..=max_week`. Weeks with no posts
/// are kept as empty buckets. Posts before the origin are returned as rejects.
pub fn bucket_posts(posts: Vec<Post>, clock: WeekClock) -> Result<(Vec<WeekBucket>, usize)> {
    let mut by_week: BTreeMap<usize, Vec<Post>> = BTreeMap::new();
    let mut rejected = 0;
    for p in posts {
        match clock.week_of(p.timestamp) {
            Some(w) => by_week.entry(w).or_default().push(p),
            None => rejected += 1,
        }
    }
    let Some(&last) = by_week.keys().next_back() else {
        return Err(Error::EmptyCorpus);
    };
    let mut buckets: Vec<WeekBucket> = (0..=last)
        .map(|w| WeekBucket {
            week_index: w,
            posts: Vec::new(),
        })
        .collect();
    for (w, mut ps) in by_week {
        // order-independent assembly
        ps.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.post_id.cmp(&b.post_id)));
        buckets[w].posts = ps;
    }
    Ok((buckets, rejected))
}

/// One retained vocabulary entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub word: String,
    /// Number of distinct posts containing the word across the corpus.
    pub post_freq: usize,
    /// Number of token occurrences across the corpus.
    pub token_count: usize,
    pub stopword: bool,
}

/// Retained words with dense ids assigned by descending post frequency
/// (ties broken lexicographically).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn from_entries(entries: Vec<VocabEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        Self { entries, index }
    }

    /// Rebuilds the lookup index, e.g. after deserialization.
    pub fn reindex(self) -> Self {
        Self::from_entries(self.entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.entries[id].word
    }

    pub fn entry(&self, id: usize) -> &VocabEntry {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn is_stopword(&self, id: usize) -> bool {
        self.entries[id].stopword
    }

    pub fn lookup(&self, word: &str) -> Result<usize> {
        self.id(word).ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    /// Maps each post to its in-vocabulary token ids, dropping unknown tokens.
    pub fn encode_bucket(&self, bucket: &WeekBucket) -> EncodedBucket {
        EncodedBucket {
            week_index: bucket.week_index,
            posts: bucket
                .posts
                .iter()
                .map(|p| p.tokens.iter().filter_map(|t| self.id(t)).collect())
                .collect(),
        }
    }
}

/// Posts of one week as sequences of vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncodedBucket {
    pub week_index: usize,
    pub posts: Vec<Vec<usize>>,
}

impl EncodedBucket {
    pub fn post_count(&self) -> usize {
        self.posts.len()
    }

    pub fn token_count(&self) -> usize {
        self.posts.iter().map(Vec::len).sum()
    }
}

/// Retains every word whose distinct-post count is at least `min_post_freq`.
/// Stopwords are retained and flagged.
pub fn build_vocabulary(
    buckets: &[WeekBucket],
    min_post_freq: usize,
    stopwords: &BTreeSet<String>,
) -> Result<Vocabulary> {
    if min_post_freq < 1 {
        return Err(Error::InvalidParameter("min_post_freq must be >= 1".into()));
    }
    if buckets.is_empty() || buckets.iter().all(|b| b.posts.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for post in buckets.iter().flat_map(|b| &b.posts) {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for tok in &post.tokens {
            let e = counts.entry(tok.as_str()).or_default();
            e.1 += 1;
            if seen.insert(tok.as_str()) {
                e.0 += 1;
            }
        }
    }
    let mut kept: Vec<VocabEntry> = counts
        .into_iter()
        .filter(|(_, (pf, _))| *pf >= min_post_freq)
        .map(|(w, (pf, tc))| VocabEntry {
            word: w.to_string(),
            post_freq: pf,
            token_count: tc,
            stopword: stopwords.contains(w),
        })
        .collect();
    kept.sort_by(|a, b| b.post_freq.cmp(&a.post_freq).then_with(|| a.word.cmp(&b.word)));
    Ok(Vocabulary::from_entries(kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::borrow::ToOwned;

    fn post(id: &str, ts: i64, text: &str) -> Post {
        Post {
            post_id: id.into(),
            timestamp: ts,
            region: None,
            tokens: tokenize_normalize(text, &IdentityStemmer),
        }
    }

    #[test]
    fn casefold() {
        assert_eq!(
            tokenize_normalize("Путин ПУТИН", &IdentityStemmer),
            vec!["путин".to_owned(), "путин".to_owned()]
        );
    }

    #[test]
    fn empty_text() {
        assert!(tokenize_normalize("", &IdentityStemmer).is_empty());
        assert!(tokenize_normalize("   \t\n", &IdentityStemmer).is_empty());
    }

    #[test]
    fn urls_and_punctuation_are_stripped() {
        let toks = tokenize_normalize("See https://vk.com/x, now! war... (peace)", &IdentityStemmer);
        assert_eq!(toks, vec!["see", "now", "war", "peace"]);
    }

    #[test]
    fn suffix_stemmer_keeps_short_stems() {
        let s = SuffixStemmer::default();
        assert_eq!(s.stem("войнами"), "войн");
        assert_eq!(s.stem("walking"), "walk");
        assert_eq!(s.stem("war"), "war");
    }

    #[test]
    fn week_gap_preserved() {
        let clock = WeekClock::new(0, 10).unwrap();
        let posts = vec![post("a", 1, "x"), post("b", 25, "y")];
        let (buckets, rejected) = bucket_posts(posts, clock).unwrap();
        assert_eq!(rejected, 0);
        assert_eq!(buckets.len(), 3);
        assert_eq!(buckets[1].post_count(), 0);
    }

    #[test]
    fn single_week() {
        let clock = WeekClock::new(100, 10).unwrap();
        let posts = vec![post("a", 100, "x"), post("b", 101, "y"), post("c", 109, "z")];
        let (buckets, _) = bucket_posts(posts, clock).unwrap();
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[0].post_count(), 3);
    }

    #[test]
    fn posts_before_origin_rejected() {
        let clock = WeekClock::new(100, 10).unwrap();
        let (_, rejected) = bucket_posts(vec![post("a", 99, "x"), post("b", 100, "y")], clock).unwrap();
        assert_eq!(rejected, 1);
        assert_eq!(
            bucket_posts(vec![post("a", 99, "x")], clock).unwrap_err(),
            Error::EmptyCorpus
        );
    }

    fn corpus_with(word: &str, n_posts: usize) -> Vec<WeekBucket> {
        let posts = (0..10)
            .map(|i| {
                let text = if i < n_posts { format!("{word} {word} filler") } else { "filler".into() };
                post(&format!("p{i}"), 0, &text)
            })
            .collect();
        vec![WeekBucket { week_index: 0, posts }]
    }

    #[test]
    fn threshold_boundary() {
        let none = BTreeSet::new();
        let v = build_vocabulary(&corpus_with("kept", 5), 5, &none).unwrap();
        assert!(v.id("kept").is_some());
        assert_eq!(v.entry(v.id("kept").unwrap()).post_freq, 5);
        assert_eq!(v.entry(v.id("kept").unwrap()).token_count, 10);
        let v = build_vocabulary(&corpus_with("dropped", 4), 5, &none).unwrap();
        assert!(v.id("dropped").is_none());
    }

    #[test]
    fn stopwords_retained_and_flagged() {
        let stop: BTreeSet<String> = ["filler".to_owned()].into_iter().collect();
        let v = build_vocabulary(&corpus_with("x", 5), 5, &stop).unwrap();
        let id = v.id("filler").unwrap();
        assert!(v.is_stopword(id));
        assert_eq!(id, 0, "most frequent word gets id 0");
    }

    #[test]
    fn ties_broken_lexicographically() {
        let posts = vec![post("1", 0, "b a c"), post("2", 0, "b a")];
        let v = build_vocabulary(&[WeekBucket { week_index: 0, posts }], 1, &BTreeSet::new()).unwrap();
        assert_eq!(v.word(0), "a");
        assert_eq!(v.word(1), "b");
        assert_eq!(v.word(2), "c");
    }

    #[test]
    fn empty_corpus_rejected() {
        assert_eq!(build_vocabulary(&[], 1, &BTreeSet::new()).unwrap_err(), Error::EmptyCorpus);
        assert!(build_vocabulary(&corpus_with("x", 1), 0, &BTreeSet::new()).is_err());
    }
}
