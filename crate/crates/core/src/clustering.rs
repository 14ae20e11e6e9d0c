//! LOWESS smoothing and spectral clustering of difference series, with trend
//! labels and the per-cluster report.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::dynamics::cosine_distance;
use crate::linalg::{symmetric_eigen, top_eigen_psd, Matrix};
use crate::math::{exp, mean, median, norm, sqrt, std_dev};
use crate::{Error, Result};

/// Above this many series the eigenvectors come from block power iteration
/// instead of a full Jacobi decomposition.
const DENSE_EIGEN_LIMIT: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub clusters: usize,
    pub lowess_frac: f64,
    /// Kernel width; `None` uses the median pairwise cosine distance.
    pub affinity_sigma: Option<f64>,
    pub sample_size: usize,
    /// Trend threshold as a fraction of the std of cluster means.
    pub trend_fraction: f64,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            clusters: 3,
            lowess_frac: 0.25,
            affinity_sigma: None,
            sample_size: 5000,
            trend_fraction: 0.25,
            kmeans_restarts: 10,
            seed: 7,
        }
    }
}

/// Locally weighted linear regression on `x = 0..n` with tricube weights over
/// the `ceil(frac * n)` nearest points, evaluated at every index. A window
/// with fewer than two positively weighted points falls back to its mean.
pub fn lowess_smooth(y: &[f64], frac: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { needed: 3, got: n });
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidParameter(format!("lowess frac {frac} not in (0, 1]")));
    }
    let span = (libm::ceil(frac * n as f64 - 1e-9) as usize).clamp(1, n);
    let mut out = Vec::with_capacity(n);
    let mut lo = 0usize;
    for i in 0..n {
        // slide the window right while that brings it closer to i
        while lo + span < n && (lo + span) - i < i - lo {
            lo += 1;
        }
        let hi = lo + span; // exclusive
        let h = (i - lo).max(hi - 1 - i) as f64;
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        let mut positive = 0;
        let mut weights = Vec::with_capacity(span);
        for j in lo..hi {
            let d = (j as f64 - i as f64).abs();
            let w = if h == 0.0 {
                1.0
            } else {
                let q = d / h;
                if q < 1.0 {
                    let t = 1.0 - q * q * q;
                    t * t * t
                } else {
                    0.0
                }
            };
            if w > 0.0 {
                positive += 1;
            }
            weights.push(w);
            sw += w;
            sx += w * j as f64;
            sy += w * y[j];
        }
        if positive < 2 {
            out.push(mean(&y[lo..hi]));
            continue;
        }
        let xbar = sx / sw;
        let ybar = sy / sw;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (k, j) in (lo..hi).enumerate() {
            let dx = j as f64 - xbar;
            sxx += weights[k] * dx * dx;
            sxy += weights[k] * dx * (y[j] - ybar);
        }
        let fit = if sxx > 1e-12 * sw {
            ybar + sxy / sxx * (i as f64 - xbar)
        } else {
            ybar
        };
        out.push(fit);
    }
    Ok(out)
}

/// Sum of absolute successive differences.
pub fn total_variation(y: &[f64]) -> f64 {
    y.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Cosine distance between series. Zero series are identical to each other
/// and orthogonal to everything else, so they cannot glue clusters together.
fn series_distance(a: &[f64], b: &[f64]) -> f64 {
    let d = cosine_distance(a, b);
    if !d.zero_norm {
        return d.value;
    }
    if norm(a) == 0.0 && norm(b) == 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Assignments from spectral clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub assignments: Vec<usize>,
    /// All series were identical; everything lands in cluster 0.
    pub degenerate: bool,
    pub sigma: f64,
}

/// Spectral clustering with affinity `exp(-d_cos / sigma)`, the symmetric
/// normalized Laplacian, row-normalized bottom eigenvectors and seeded
/// k-means++. Cluster ids are numbered by first appearance.
pub fn spectral_cluster(series: &[Vec<f64>], config: &ClusterConfig) -> Result<SpectralResult> {
    let n = series.len();
    let c = config.clusters;
    if c < 1 || n < c {
        return Err(Error::InvalidParameter(format!("need 1 <= c <= n, got c={c}, n={n}")));
    }
    if let Some(first) = series.first() {
        if let Some(bad) = series.iter().find(|s| s.len() != first.len()) {
            return Err(Error::ShapeMismatch {
                expected: first.len(),
                found: bad.len(),
            });
        }
    }
    let mut dist = Matrix::zeros(n, n);
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = series_distance(&series[i], &series[j]);
            dist[(i, j)] = d;
            dist[(j, i)] = d;
            upper.push(d);
        }
    }
    let all_same = upper.iter().all(|&d| d <= 1e-12);
    if c == 1 || all_same {
        return Ok(SpectralResult {
            assignments: vec![0; n],
            degenerate: all_same && n > 1,
            sigma: 0.0,
        });
    }
    let sigma = match config.affinity_sigma {
        Some(s) if s > 0.0 => s,
        _ => {
            let m = median(&upper);
            if m > 0.0 {
                m
            } else {
                let pos: Vec<f64> = upper.iter().copied().filter(|&d| d > 0.0).collect();
                mean(&pos)
            }
        }
    };

    let mut aff = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                aff[(i, j)] = exp(-dist[(i, j)] / sigma);
            }
        }
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = aff.row(i).iter().sum();
            if d > 0.0 {
                1.0 / sqrt(d)
            } else {
                0.0
            }
        })
        .collect();
    // M = D^-1/2 A D^-1/2; the top eigenvectors of M are the bottom ones of
    // the normalized Laplacian I - M.
    let mut m = aff;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    let vectors = if n <= DENSE_EIGEN_LIMIT {
        symmetric_eigen(&m).vectors
    } else {
        for i in 0..n {
            m[(i, i)] += 1.0; // shift to PSD, same eigenvectors
        }
        top_eigen_psd(&m, c, config.seed, 3000, 1e-12).vectors
    };
    let embedded: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..c).map(|k| vectors[(i, k)]).collect();
            let r = norm(&row);
            if r > 0.0 {
                row.iter_mut().for_each(|x| *x /= r);
            }
            row
        })
        .collect();
    let (raw, _) = kmeans(&embedded, c, config.seed, config.kmeans_restarts.max(1), 300);
    Ok(SpectralResult {
        assignments: relabel_by_first_appearance(&raw),
        degenerate: false,
        sigma,
    })
}

fn relabel_by_first_appearance(assign: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    assign
        .iter()
        .map(|&a| {
            if a >= map.len() {
                map.resize(a + 1, None);
            }
            *map[a].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding; the restart with the lowest
/// inertia wins. Returns assignments and inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize, max_iter: usize) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        centers.push(points[rng.gen_range(0..n)].clone());
        let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let pick = if total <= 0.0 {
                rng.gen_range(0..n)
            } else {
                let mut u = rng.gen::<f64>() * total;
                let mut idx = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if u < d {
                        idx = i;
                        break;
                    }
                    u -= d;
                }
                idx
            };
            centers.push(points[pick].clone());
            for (i, p) in points.iter().enumerate() {
                d2[i] = d2[i].min(sq_dist(p, &centers[centers.len() - 1]));
            }
        }
        let mut assign = vec![0usize; n];
        for iter in 0..max_iter {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let mut bi = 0;
                let mut bd = f64::INFINITY;
                for (ci, c) in centers.iter().enumerate() {
                    let d = sq_dist(p, c);
                    if d < bd {
                        bd = d;
                        bi = ci;
                    }
                }
                if assign[i] != bi {
                    changed = true;
                    assign[i] = bi;
                }
            }
            if !changed && iter > 0 {
                break;
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (i, p) in points.iter().enumerate() {
                counts[assign[i]] += 1;
                for (s, x) in sums[assign[i]].iter_mut().zip(p) {
                    *s += x;
                }
            }
            for ci in 0..k {
                if counts[ci] > 0 {
                    centers[ci] = sums[ci].iter().map(|s| s / counts[ci] as f64).collect();
                }
            }
        }
        let inertia: f64 = points
            .iter()
            .enumerate()
            .map(|(i, p)| sq_dist(p, &centers[assign[i]]))
            .sum();
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((assign, inertia));
        }
    }
    best.expect("at least one restart")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increase,
    Decrease,
    Flatline,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Increase => "increase",
            Trend::Decrease => "decrease",
            Trend::Flatline => "flatline",
        }
    }
}

/// Labels a mean trajectory by its average value against `+-theta`.
pub fn label_trend(mean_trajectory: &[f64], theta: f64) -> Trend {
    let m = mean(mean_trajectory);
    if m > theta {
        Trend::Increase
    } else if m < -theta {
        Trend::Decrease
    } else {
        Trend::Flatline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: usize,
    pub size: usize,
    pub fraction: f64,
    pub mean_trajectory: Vec<f64>,
    pub trend: Trend,
}

/// Clustering of smoothed difference series for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryClustering {
    pub word_ids: Vec<usize>,
    pub assignments: Vec<usize>,
    pub clusters: Vec<ClusterSummary>,
    pub theta: f64,
    pub sigma: f64,
    pub degenerate: bool,
}

impl TrajectoryClustering {
    pub fn cluster_of(&self, word: usize) -> Option<usize> {
        self.word_ids.iter().position(|&w| w == word).map(|i| self.assignments[i])
    }
}

/// Smooths, clusters and labels `(word id, difference series)` pairs. At most
/// `sample_size` series are used, taking the lowest ids first (ids are
/// ordered by descending post frequency).
pub fn cluster_trajectories(series: &[(usize, Vec<f64>)], config: &ClusterConfig) -> Result<TrajectoryClustering> {
    let mut chosen: Vec<&(usize, Vec<f64>)> = series.iter().collect();
    chosen.sort_by_key(|(id, _)| *id);
    chosen.truncate(config.sample_size);
    let word_ids: Vec<usize> = chosen.iter().map(|(id, _)| *id).collect();
    let smoothed: Vec<Vec<f64>> = chosen
        .iter()
        .map(|(_, s)| lowess_smooth(s, config.lowess_frac))
        .collect::<Result<_>>()?;
    let spectral = spectral_cluster(&smoothed, config)?;
    let c = spectral.assignments.iter().max().map_or(0, |m| m + 1);
    let len = smoothed.first().map_or(0, Vec::len);
    let n = smoothed.len();
    let mut sums = vec![vec![0.0; len]; c];
    let mut sizes = vec![0usize; c];
    for (s, &a) in smoothed.iter().zip(&spectral.assignments) {
        sizes[a] += 1;
        for (acc, x) in sums[a].iter_mut().zip(s) {
            *acc += x;
        }
    }
    let means: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&sizes)
        .map(|(s, &k)| s.into_iter().map(|x| x / k.max(1) as f64).collect())
        .collect();
    let levels: Vec<f64> = means.iter().map(|m| mean(m)).collect();
    let theta = config.trend_fraction * std_dev(&levels);
    let clusters = means
        .into_iter()
        .enumerate()
        .map(|(id, m)| ClusterSummary {
            id,
            size: sizes[id],
            fraction: sizes[id] as f64 / n as f64,
            trend: label_trend(&m, theta),
            mean_trajectory: m,
        })
        .collect();
    Ok(TrajectoryClustering {
        word_ids,
        assignments: spectral.assignments,
        clusters,
        theta,
        sigma: spectral.sigma,
        degenerate: spectral.degenerate,
    })
}

/// One row of the cluster report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cluster: usize,
    pub trend: Trend,
    pub percent: f64,
    pub size: usize,
    pub top_words: Vec<String>,
}

/// Rows sorted by cluster id; members ranked by global post frequency.
pub fn cluster_report(clustering: &TrajectoryClustering, vocab: &Vocabulary, top_k: usize) -> Vec<ReportRow> {
    clustering
        .clusters
        .iter()
        .map(|c| {
            let mut members: Vec<usize> = clustering
                .word_ids
                .iter()
                .zip(&clustering.assignments)
                .filter(|(_, &a)| a == c.id)
                .map(|(&w, _)| w)
                .collect();
            members.sort_by(|&a, &b| {
                vocab
                    .entry(b)
                    .post_freq
                    .cmp(&vocab.entry(a).post_freq)
                    .then_with(|| vocab.word(a).cmp(vocab.word(b)))
            });
            ReportRow {
                cluster: c.id,
                trend: c.trend,
                percent: 100.0 * c.fraction,
                size: c.size,
                top_words: members.iter().take(top_k).map(|&w| String::from(vocab.word(w))).collect(),
            }
        })
        .collect()
}

/// Plain-text rendering of the report.
pub fn render_report(rows: &[ReportRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:<9} {:>7}  sample words", "cluster", "trend", "% words");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:<9} {:>7.1}  {}",
            r.cluster,
            r.trend.as_str(),
            r.percent,
            r.top_words.join(", ")
        );
    }
    s
}
