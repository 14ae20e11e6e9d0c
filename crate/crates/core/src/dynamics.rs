//! First-order difference series: concept drift by subtraction, representation
//! shift by cosine distance, and cumulative shift from week 0.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSeries;
use crate::math::cosine;
use crate::usage::UsageSeries;
use crate::{Error, Result};

/// Cosine distance with an explicit flag for zero-norm inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub value: f64,
    /// One of the vectors had zero norm; `value` is 0 by definition.
    pub zero_norm: bool,
}

/// `1 - cos(u, v)` clamped to `[0, 2]`. Zero-norm input yields 0 with a flag.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Distance {
    debug_assert_eq!(u.len(), v.len());
    match cosine(u, v) {
        Some(c) => Distance {
            value: (1.0 - c).clamp(0.0, 2.0),
            zero_norm: false,
        },
        None => Distance {
            value: 0.0,
            zero_norm: true,
        },
    }
}

/// `out[i] = series[i+1] - series[i]`.
pub fn diff_usage(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: series.len(),
        });
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Cosine distance between a word's vectors at adjacent weeks, with the
/// number of zero-norm comparisons.
pub fn diff_embeddings(series: &EmbeddingSeries, word: usize) -> Result<(Vec<f64>, usize)> {
    check_word(series, word)?;
    if series.weeks() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: series.weeks(),
        });
    }
    let mut zero = 0;
    let out = (0..series.weeks() - 1)
        .map(|t| {
            let d = cosine_distance(series.vector(t, word), series.vector(t + 1, word));
            zero += d.zero_norm as usize;
            d.value
        })
        .collect();
    Ok((out, zero))
}

/// Cosine distance from each week's vector to the week-0 vector.
pub fn cumulative_shift(series: &EmbeddingSeries, word: usize) -> Result<(Vec<f64>, usize)> {
    check_word(series, word)?;
    let mut zero = 0;
    let origin = series.vector(0, word);
    let out = (0..series.weeks())
        .map(|t| {
            if t == 0 {
                return 0.0;
            }
            let d = cosine_distance(series.vector(t, word), origin);
            zero += d.zero_norm as usize;
            d.value
        })
        .collect();
    Ok((out, zero))
}

fn check_word(series: &EmbeddingSeries, word: usize) -> Result<()> {
    if series.weeks() == 0 {
        return Err(Error::EmptyCorpus);
    }
    if word >= series.vocab_size() {
        return Err(Error::UnknownWord(format!("id {word}")));
    }
    Ok(())
}

/// Difference series of one word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordShift {
    pub id: usize,
    /// Δτ_f, length T-1. Zeros for stopwords.
    pub d_f: Vec<f64>,
    /// Δτ_χ, length T-1. Zeros for stopwords.
    pub d_chi: Vec<f64>,
    /// Δτ_e, length T-1, in `[0, 2]`.
    pub d_e: Vec<f64>,
    /// Cosine distance to week 0, length T, `cum[0] == 0`.
    pub cum: Vec<f64>,
    /// False for stopwords, which carry no usage statistics.
    pub usage_tracked: bool,
    /// Number of zero-norm comparisons (word untrained in some week).
    pub zero_norm: usize,
}

/// Difference series for every vocabulary word, indexed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSeries {
    pub weeks: usize,
    pub words: Vec<WordShift>,
}

impl ShiftSeries {
    pub fn get(&self, id: usize) -> Option<&WordShift> {
        self.words.get(id)
    }
}

pub fn build_shift_series(usage: &UsageSeries, embeddings: &EmbeddingSeries) -> Result<ShiftSeries> {
    let weeks = embeddings.weeks();
    if usage.weeks != weeks {
        return Err(Error::ShapeMismatch {
            expected: weeks,
            found: usage.weeks,
        });
    }
    let mut words = Vec::with_capacity(embeddings.vocab_size());
    for id in 0..embeddings.vocab_size() {
        let (d_e, z1) = diff_embeddings(embeddings, id)?;
        let (cum, z2) = cumulative_shift(embeddings, id)?;
        let (d_f, d_chi, tracked) = match usage.get(id) {
            Some(u) => (diff_usage(&u.tau_f)?, diff_usage(&u.tau_chi)?, true),
            None => (vec![0.0; weeks - 1], vec![0.0; weeks - 1], false),
        };
        words.push(WordShift {
            id,
            d_f,
            d_chi,
            d_e,
            cum,
            usage_tracked: tracked,
            zero_norm: z1 + z2,
        });
    }
    Ok(ShiftSeries { weeks, words })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingSnapshot;

    fn series_of(frames: &[Vec<f64>], dim: usize) -> EmbeddingSeries {
        let snaps = frames
            .iter()
            .enumerate()
            .map(|(t, m)| EmbeddingSnapshot {
                week_index: t,
                vocab_size: m.len() / dim,
                dim,
                input: m.clone(),
                output: m.clone(),
                epochs_run: 1,
                final_rho: 0.0,
                cap_hit: false,
                epoch_losses: vec![],
            })
            .collect();
        EmbeddingSeries::new(snaps).unwrap()
    }

    #[test]
    fn cosine_cases() {
        let u = [0.3, -1.2, 2.0];
        assert_eq!(cosine_distance(&u, &u).value, 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).value - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        assert_eq!(cosine_distance(&u, &neg).value, 2.0);
        let z = cosine_distance(&[0.0, 0.0], &[1.0, 0.0]);
        assert!(z.zero_norm);
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn usage_diffs() {
        let d = diff_usage(&[0.1, 0.3, 0.2]).unwrap();
        assert!((d[0] - 0.2).abs() < 1e-15 && (d[1] + 0.1).abs() < 1e-15);
        assert_eq!(diff_usage(&[4.0; 5]).unwrap(), vec![0.0; 4]);
        assert!(diff_usage(&[1.0]).is_err());
    }

    #[test]
    fn frozen_embeddings_have_no_shift() {
        let m = vec![0.5, 1.0, -0.2, 0.7];
        let s = series_of(&[m.clone(), m.clone(), m], 2);
        assert_eq!(diff_embeddings(&s, 1).unwrap().0, vec![0.0, 0.0]);
        assert_eq!(cumulative_shift(&s, 0).unwrap().0, vec![0.0; 3]);
    }

    #[test]
    fn negation_gives_two() {
        let s = series_of(&[vec![1.0, 2.0], vec![-1.0, -2.0]], 2);
        assert_eq!(diff_embeddings(&s, 0).unwrap().0, vec![2.0]);
        let c = cumulative_shift(&s, 0).unwrap().0;
        assert_eq!(c[0], 0.0);
        assert_eq!(c[1], 2.0);
    }

    #[test]
    fn unknown_word() {
        let s = series_of(&[vec![1.0, 2.0], vec![1.0, 2.0]], 2);
        assert!(matches!(diff_embeddings(&s, 5), Err(Error::UnknownWord(_))));
    }

    #[test]
    fn zero_rows_are_flagged() {
        let s = series_of(&[vec![0.0, 0.0], vec![1.0, 2.0]], 2);
        let (d, z) = diff_embeddings(&s, 0).unwrap();
        assert_eq!(d, vec![0.0]);
        assert_eq!(z, 1);
    }
}
