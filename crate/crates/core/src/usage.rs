//! Weekly word frequency and tf-idf, concatenated into concept-drift series.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedBucket, Vocabulary};
use crate::math::ln;
use crate::{Error, Result};

/// Per-week statistic indexed by vocabulary id. Stopwords are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeekStat {
    pub values: Vec<f64>,
    /// Set when the bucket had no countable tokens and every value is zero.
    pub empty: bool,
}

/// Token occurrences per vocabulary id and distinct-post counts.
fn counts(bucket: &EncodedBucket, vocab: &Vocabulary) -> (Vec<usize>, Vec<usize>) {
    let mut tok = vec![0usize; vocab.len()];
    let mut df = vec![0usize; vocab.len()];
    let mut last_post = vec![usize::MAX; vocab.len()];
    for (pi, post) in bucket.posts.iter().enumerate() {
        for &w in post {
            tok[w] += 1;
            if last_post[w] != pi {
                last_post[w] = pi;
                df[w] += 1;
            }
        }
    }
    (tok, df)
}

/// Normalized frequency `count(w,t) / Σ count(w',t)` over non-stopwords.
pub fn term_frequency(bucket: &EncodedBucket, vocab: &Vocabulary) -> WeekStat {
    let (tok, _) = counts(bucket, vocab);
    let total: usize = tok
        .iter()
        .enumerate()
        .filter(|(id, _)| !vocab.is_stopword(*id))
        .map(|(_, c)| *c)
        .sum();
    if total == 0 {
        return WeekStat {
            values: vec![0.0; vocab.len()],
            empty: true,
        };
    }
    let values = tok
        .iter()
        .enumerate()
        .map(|(id, &c)| {
            if vocab.is_stopword(id) {
                0.0
            } else {
                c as f64 / total as f64
            }
        })
        .collect();
    WeekStat {
        values,
        empty: false,
    }
}

/// `ln(count(w,t)) * ln(|P_t| / df(w,t))`, zero for absent words and stopwords.
pub fn tfidf(bucket: &EncodedBucket, vocab: &Vocabulary) -> WeekStat {
    let n_posts = bucket.post_count();
    if n_posts == 0 {
        return WeekStat {
            values: vec![0.0; vocab.len()],
            empty: true,
        };
    }
    let (tok, df) = counts(bucket, vocab);
    let values = (0..vocab.len())
        .map(|id| {
            if vocab.is_stopword(id) || tok[id] == 0 {
                0.0
            } else {
                tfidf_value(tok[id], n_posts, df[id])
            }
        })
        .collect();
    WeekStat {
        values,
        empty: false,
    }
}

/// Single tf-idf value for a word with `count` occurrences in `df` of `n_posts` posts.
pub fn tfidf_value(count: usize, n_posts: usize, df: usize) -> f64 {
    if count == 0 || df == 0 || df >= n_posts {
        return 0.0;
    }
    ln(count as f64) * ln(n_posts as f64 / df as f64)
}

/// Concept-drift series of one non-stopword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordUsage {
    pub id: usize,
    pub tau_f: Vec<f64>,
    pub tau_chi: Vec<f64>,
}

/// Usage series for every retained non-stopword, sorted by vocabulary id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageSeries {
    pub weeks: usize,
    pub words: Vec<WordUsage>,
    /// Weeks whose bucket had nothing to count.
    pub empty_weeks: Vec<usize>,
}

impl UsageSeries {
    pub fn get(&self, id: usize) -> Option<&WordUsage> {
        self.words
            .binary_search_by_key(&id, |w| w.id)
            .ok()
            .map(|i| &self.words[i])
    }
}

pub fn build_usage_series(buckets: &[EncodedBucket], vocab: &Vocabulary) -> Result<UsageSeries> {
    if buckets.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: buckets.len(),
        });
    }
    let weeks = buckets.len();
    let mut words: Vec<WordUsage> = (0..vocab.len())
        .filter(|&id| !vocab.is_stopword(id))
        .map(|id| WordUsage {
            id,
            tau_f: Vec::with_capacity(weeks),
            tau_chi: Vec::with_capacity(weeks),
        })
        .collect();
    let mut empty_weeks = Vec::new();
    for (t, bucket) in buckets.iter().enumerate() {
        let f = term_frequency(bucket, vocab);
        let chi = tfidf(bucket, vocab);
        if f.empty {
            empty_weeks.push(t);
        }
        for w in &mut words {
            w.tau_f.push(f.values[w.id]);
            w.tau_chi.push(chi.values[w.id]);
        }
    }
    Ok(UsageSeries {
        weeks,
        words,
        empty_weeks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VocabEntry;
    use alloc::string::String;

    fn vocab(words: &[(&str, bool)]) -> Vocabulary {
        Vocabulary::from_entries(
            words
                .iter()
                .map(|(w, s)| VocabEntry {
                    word: String::from(*w),
                    post_freq: 1,
                    token_count: 1,
                    stopword: *s,
                })
                .collect(),
        )
    }

    fn bucket(posts: Vec<Vec<usize>>) -> EncodedBucket {
        EncodedBucket {
            week_index: 0,
            posts,
        }
    }

    #[test]
    fn frequency_half() {
        let v = vocab(&[("a", false), ("b", false), ("c", false)]);
        let f = term_frequency(&bucket(vec![vec![0, 1], vec![0, 1]]), &v);
        assert_eq!(f.values[0], 0.5);
        assert_eq!(f.values[2], 0.0);
    }

    #[test]
    fn stopwords_excluded_from_denominator() {
        let v = vocab(&[("a", false), ("the", true)]);
        let f = term_frequency(&bucket(vec![vec![0, 1, 1, 1]]), &v);
        assert_eq!(f.values[0], 1.0);
        assert_eq!(f.values[1], 0.0);
        let chi = tfidf(&bucket(vec![vec![0, 0, 1, 1], vec![1]]), &v);
        assert_eq!(chi.values[1], 0.0);
    }

    #[test]
    fn empty_bucket_flagged() {
        let v = vocab(&[("a", false)]);
        let f = term_frequency(&bucket(vec![]), &v);
        assert!(f.empty);
        assert!(tfidf(&bucket(vec![]), &v).empty);
    }

    #[test]
    fn tfidf_singleton_and_ubiquitous_are_zero() {
        assert_eq!(tfidf_value(1, 10, 1), 0.0);
        assert_eq!(tfidf_value(7, 10, 10), 0.0);
        assert_eq!(tfidf_value(0, 10, 0), 0.0);
    }

    #[test]
    fn tfidf_hand_value() {
        let v = tfidf_value(4, 10, 2);
        assert!((v - 2.231_154_703).abs() < 1e-6, "{v}");
        // same through the bucket path: word 0 appears 4 times in 2 of 10 posts
        let voc = vocab(&[("a", false), ("b", false)]);
        let mut posts = vec![vec![0, 0], vec![0, 0]];
        posts.extend((0..8).map(|_| vec![1]));
        let chi = tfidf(&bucket(posts), &voc);
        assert!((chi.values[0] - v).abs() < 1e-15);
    }

    #[test]
    fn series_shape_and_order() {
        let v = vocab(&[("a", false), ("s", true), ("b", false)]);
        let buckets: Vec<EncodedBucket> = (0..3)
            .map(|t| EncodedBucket {
                week_index: t,
                posts: vec![vec![0, 2, 1]],
            })
            .collect();
        let s = build_usage_series(&buckets, &v).unwrap();
        assert_eq!(s.words.len(), 2);
        assert!(s.get(1).is_none());
        for w in &s.words {
            assert_eq!(w.tau_f.len(), 3);
            assert!(w.tau_f.iter().all(|&x| x == 0.5));
        }
    }

    #[test]
    fn too_short() {
        let v = vocab(&[("a", false)]);
        assert!(build_usage_series(&[bucket(vec![vec![0]])], &v).is_err());
    }
}
