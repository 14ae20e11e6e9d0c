//! Nearest neighbors, neighbor-distance series, local PCA trajectories and
//! keyword correlation matrices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dynamics::cosine_distance;
use crate::embeddings::EmbeddingSeries;
use crate::forecast::pearson;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::math::{dot, euclidean};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cosine" => Some(Metric::Cosine),
            "euclidean" => Some(Metric::Euclidean),
            _ => None,
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Cosine => cosine_distance(a, b).value,
            Metric::Euclidean => euclidean(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

/// Exact k-nearest neighbors of `word` at week `t`, excluding the word
/// itself. Ties are broken by id.
pub fn nearest_neighbors(
    series: &EmbeddingSeries,
    t: usize,
    word: usize,
    k: usize,
    metric: Metric,
) -> Result<Vec<Neighbor>> {
    check(series, t, word)?;
    if k == 0 {
        return Ok(Vec::new());
    }
    if k >= series.vocab_size() {
        return Err(Error::InvalidParameter(format!(
            "k={k} must be below the vocabulary size {}",
            series.vocab_size()
        )));
    }
    let q = series.vector(t, word);
    let mut all: Vec<Neighbor> = (0..series.vocab_size())
        .filter(|&v| v != word)
        .map(|v| Neighbor {
            id: v,
            distance: metric.distance(q, series.vector(t, v)),
        })
        .collect();
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    all.truncate(k);
    Ok(all)
}

fn check(series: &EmbeddingSeries, t: usize, word: usize) -> Result<()> {
    if word >= series.vocab_size() {
        return Err(Error::UnknownWord(format!("id {word}")));
    }
    if t >= series.weeks() {
        return Err(Error::InvalidParameter(format!("week {t} out of range 0..{}", series.weeks())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSeries {
    pub neighbor: usize,
    /// Cosine distance to the query word at every week.
    pub distances: Vec<f64>,
    /// Weeks where either vector had zero norm.
    pub zero_norm: usize,
}

/// Top-3 neighbors at the first week together with the top-3 at the last.
pub fn default_neighbor_set(series: &EmbeddingSeries, word: usize) -> Result<Vec<usize>> {
    let k = 3.min(series.vocab_size().saturating_sub(1));
    let last = series.weeks().saturating_sub(1);
    let mut set = BTreeSet::new();
    let mut out = Vec::new();
    for t in [0, last] {
        for n in nearest_neighbors(series, t, word, k, Metric::Cosine)? {
            if set.insert(n.id) {
                out.push(n.id);
            }
        }
    }
    Ok(out)
}

/// Cosine distance from `word` to each neighbor, week by week.
pub fn neighbor_distance_series(series: &EmbeddingSeries, word: usize, neighbors: &[usize]) -> Result<Vec<NeighborSeries>> {
    check(series, 0, word)?;
    neighbors
        .iter()
        .map(|&v| {
            check(series, 0, v)?;
            let mut zero = 0;
            let distances = (0..series.weeks())
                .map(|t| {
                    let d = cosine_distance(series.vector(t, word), series.vector(t, v));
                    zero += d.zero_norm as usize;
                    d.value
                })
                .collect();
            Ok(NeighborSeries {
                neighbor: v,
                distances,
                zero_norm: zero,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekNeighbors {
    pub t: usize,
    pub ids: Vec<usize>,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory2D {
    pub word: usize,
    pub points: Vec<[f64; 2]>,
    pub neighbors: Vec<WeekNeighbors>,
    /// Two principal axes, each of length d.
    pub basis: [Vec<f64>; 2],
    pub mean: Vec<f64>,
    /// Explained-variance fractions of the two axes.
    pub evr: [f64; 2],
    /// Fewer than two independent directions in the fitting set.
    pub degenerate: bool,
}

/// 2-D PCA fitted on the word's vectors and its `k` Euclidean neighbors at
/// each week.
pub fn project_trajectory(series: &EmbeddingSeries, word: usize, k: usize) -> Result<Trajectory2D> {
    check(series, 0, word)?;
    let weeks = series.weeks();
    if weeks < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: weeks });
    }
    let d = series.dim();
    let mut week_ids = Vec::with_capacity(weeks);
    let mut stack: Vec<&[f64]> = Vec::new();
    for t in 0..weeks {
        stack.push(series.vector(t, word));
        let ids: Vec<usize> = nearest_neighbors(series, t, word, k, Metric::Euclidean)?
            .into_iter()
            .map(|n| n.id)
            .collect();
        for &v in &ids {
            stack.push(series.vector(t, v));
        }
        week_ids.push(ids);
    }
    let pca = Pca::fit(&stack, d);
    let points = (0..weeks).map(|t| pca.project(series.vector(t, word))).collect();
    let neighbors = week_ids
        .into_iter()
        .enumerate()
        .map(|(t, ids)| WeekNeighbors {
            t,
            points: ids.iter().map(|&v| pca.project(series.vector(t, v))).collect(),
            ids,
        })
        .collect();
    Ok(Trajectory2D {
        word,
        points,
        neighbors,
        basis: pca.basis,
        mean: pca.mean,
        evr: pca.evr,
        degenerate: pca.degenerate,
    })
}

/// Two-component PCA over a set of row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub basis: [Vec<f64>; 2],
    pub evr: [f64; 2],
    pub degenerate: bool,
}

impl Pca {
    pub fn fit(rows: &[&[f64]], d: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(*r) {
                *m += x / n;
            }
        }
        let mut cov = Matrix::zeros(d, d);
        for r in rows {
            for i in 0..d {
                let ci = r[i] - mean[i];
                for j in i..d {
                    cov[(i, j)] += ci * (r[j] - mean[j]) / n;
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        let eig = symmetric_eigen(&cov);
        let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
        let l0 = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let l1 = eig.values.get(1).copied().unwrap_or(0.0).max(0.0);
        let tiny = 1e-12 * total.max(f64::MIN_POSITIVE);
        let degenerate = d < 2 || l1 <= tiny;
        let b0 = if d > 0 && l0 > tiny { eig.vectors.column(0) } else { vec![0.0; d] };
        let b1 = if degenerate { vec![0.0; d] } else { eig.vectors.column(1) };
        let evr = if total > 0.0 {
            [l0 / total, if degenerate { 0.0 } else { l1 / total }]
        } else {
            [0.0, 0.0]
        };
        Self {
            mean,
            basis: [b0, b1],
            evr,
            degenerate,
        }
    }

    pub fn project(&self, v: &[f64]) -> [f64; 2] {
        let c: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        [dot(&c, &self.basis[0]), dot(&c, &self.basis[1])]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// `entries[i][j] = pearson(a[labels[i]], b[labels[j]])`; `None` where
    /// undefined.
    pub entries: Vec<Vec<Option<f64>>>,
}

/// Pearson correlation of every keyword's `a` series against every keyword's
/// `b` series.
pub fn series_correlation(
    a: &BTreeMap<String, Vec<f64>>,
    b: &BTreeMap<String, Vec<f64>>,
    keywords: &[String],
) -> Result<CorrelationMatrix> {
    let mut sa = Vec::with_capacity(keywords.len());
    let mut sb = Vec::with_capacity(keywords.len());
    for kw in keywords {
        sa.push(a.get(kw).ok_or_else(|| Error::UnknownWord(kw.clone()))?);
        sb.push(b.get(kw).ok_or_else(|| Error::UnknownWord(kw.clone()))?);
    }
    let len = sa.first().map_or(0, |s| s.len());
    for s in sa.iter().chain(&sb) {
        if s.len() != len {
            return Err(Error::ShapeMismatch {
                expected: len,
                found: s.len(),
            });
        }
    }
    let entries = sa
        .iter()
        .map(|x| sb.iter().map(|y| pearson(x, y).ok()).collect())
        .collect();
    Ok(CorrelationMatrix {
        labels: keywords.to_vec(),
        entries,
    })
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
    fn toy_ranking() {
        // word 0 at origin-ish, 1 close, 2 far, 3 opposite
        let m = vec![1.0, 0.0, 0.9, 0.1, 0.0, 1.0, -1.0, 0.0];
        let s = series_of(&[m], 2);
        let n = nearest_neighbors(&s, 0, 0, 3, Metric::Cosine).unwrap();
        assert_eq!(n.iter().map(|x| x.id).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(nearest_neighbors(&s, 0, 0, 0, Metric::Cosine).unwrap().is_empty());
        assert!(nearest_neighbors(&s, 0, 9, 1, Metric::Cosine).is_err());
        assert!(nearest_neighbors(&s, 0, 0, 4, Metric::Cosine).is_err());
    }

    #[test]
    fn ties_by_id() {
        let m = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.0];
        let s = series_of(&[m], 2);
        let n = nearest_neighbors(&s, 0, 0, 3, Metric::Euclidean).unwrap();
        assert_eq!(n.iter().map(|x| x.id).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn self_neighbor_series_is_zero() {
        let s = series_of(&[vec![1.0, 2.0, 3.0, 1.0], vec![2.0, 1.0, 0.0, 1.0]], 2);
        let r = neighbor_distance_series(&s, 0, &[0]).unwrap();
        assert_eq!(r[0].distances, vec![0.0, 0.0]);
    }

    #[test]
    fn trajectory_shape_and_evr_order() {
        let frames: Vec<Vec<f64>> = (0..5)
            .map(|t| {
                let t = t as f64;
                vec![1.0 + t, 0.5 * t, 0.1, 2.0, -t, 0.3, 0.2, 0.2, 0.1 * t, 1.0, 0.0, 0.4]
            })
            .collect();
        let s = series_of(&frames, 3);
        let tr = project_trajectory(&s, 0, 2).unwrap();
        assert_eq!(tr.points.len(), 5);
        assert!(tr.evr[0] >= tr.evr[1]);
        assert_eq!(tr.neighbors[0].ids.len(), 2);
    }

    #[test]
    fn collinear_stack_is_degenerate() {
        let frames: Vec<Vec<f64>> = (0..3).map(|t| vec![t as f64, 2.0 * t as f64, 1.0, 2.0]).collect();
        let s = series_of(&frames, 2);
        let tr = project_trajectory(&s, 0, 1).unwrap();
        assert!(tr.degenerate);
        assert!(tr.points.iter().all(|p| p[1] == 0.0));
    }

    #[test]
    fn correlation_diagonals() {
        let mut a = BTreeMap::new();
        let mut neg = BTreeMap::new();
        a.insert(String::from("x"), vec![1.0, 3.0, 2.0, 5.0]);
        a.insert(String::from("y"), vec![0.0, 1.0, 0.5, 0.2]);
        a.insert(String::from("z"), vec![1.0; 4]);
        for (k, v) in &a {
            neg.insert(k.clone(), v.iter().map(|x| -x).collect::<Vec<f64>>());
        }
        let kws: Vec<String> = a.keys().cloned().collect();
        let same = series_correlation(&a, &a, &kws).unwrap();
        let opp = series_correlation(&a, &neg, &kws).unwrap();
        for i in 0..2 {
            assert!((same.entries[i][i].unwrap() - 1.0).abs() < 1e-12);
            assert!((opp.entries[i][i].unwrap() + 1.0).abs() < 1e-12);
        }
        assert_eq!(same.entries[2][2], None);
    }
}
