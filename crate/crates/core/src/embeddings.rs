//! Week-by-week skip-gram embeddings with negative sampling.
//!
//! Week 0 starts from a seeded uniform initialization. Every later week is
//! warm-started from the previous week's matrices so that coordinates stay
//! comparable across time. Each week trains epoch by epoch until the mean
//! angle between a word vector and its value one epoch earlier drops to
//! `rho_threshold`, or `max_epochs` is reached.

use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedBucket, Vocabulary};
use crate::math::{acos, axpy, cosine, dot, log_sigmoid, powf, sigmoid, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedParams {
    pub dim: usize,
    /// Context radius on each side of the center word.
    pub window: usize,
    pub negatives: usize,
    pub initial_lr: f64,
    /// Learning-rate floor as a fraction of `initial_lr`.
    pub min_lr_fraction: f64,
    /// Number of epochs over which the rate falls linearly to the floor.
    pub decay_epochs: usize,
    /// Mean epoch angle (radians) at which a week counts as converged.
    pub rho_threshold: f64,
    pub max_epochs: usize,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            dim: 30,
            window: 5,
            negatives: 5,
            initial_lr: 0.025,
            min_lr_fraction: 1e-4,
            decay_epochs: 10,
            rho_threshold: 1e-4,
            max_epochs: 50,
            subsample: 0.0,
            seed: 1,
        }
    }
}

impl EmbedParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.dim < 2 {
            return bad("dim must be >= 2");
        }
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if self.rho_threshold.is_nan() || self.rho_threshold <= 0.0 {
            return bad("rho_threshold must be > 0");
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be >= 1");
        }
        if self.initial_lr.is_nan() || self.initial_lr <= 0.0 {
            return bad("initial_lr must be > 0");
        }
        if !(self.min_lr_fraction > 0.0 && self.min_lr_fraction <= 1.0) {
            return bad("min_lr_fraction must be in (0, 1]");
        }
        if self.decay_epochs < 1 {
            return bad("decay_epochs must be >= 1");
        }
        Ok(())
    }

    /// Step size for the zero-based epoch `epoch` of a week.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let frac = 1.0 - epoch as f64 / self.decay_epochs as f64;
        self.initial_lr * frac.max(self.min_lr_fraction)
    }
}

/// Embeddings of one week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSnapshot {
    pub week_index: usize,
    pub vocab_size: usize,
    pub dim: usize,
    /// Word vectors, row-major `vocab_size x dim`.
    pub input: Vec<f64>,
    /// Context vectors, row-major `vocab_size x dim`.
    pub output: Vec<f64>,
    pub epochs_run: usize,
    pub final_rho: f64,
    /// Set when training stopped at `max_epochs` without converging.
    pub cap_hit: bool,
    pub epoch_losses: Vec<f64>,
}

impl EmbeddingSnapshot {
    pub fn row(&self, word: usize) -> &[f64] {
        &self.input[word * self.dim..(word + 1) * self.dim]
    }

    pub fn context_row(&self, word: usize) -> &[f64] {
        &self.output[word * self.dim..(word + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    /// Seeded uniform initialization in `[-0.5/d, 0.5/d]`.
    pub fn initialize(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / dim as f64;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| (rng.gen::<f64>() - 0.5) * scale).collect()
        };
        let input = draw(vocab_size * dim);
        let output = draw(vocab_size * dim);
        Self {
            week_index: 0,
            vocab_size,
            dim,
            input,
            output,
            epochs_run: 0,
            final_rho: 0.0,
            cap_hit: false,
            epoch_losses: Vec::new(),
        }
    }
}

/// Ordered weekly snapshots over one vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSeries {
    pub snapshots: Vec<EmbeddingSnapshot>,
}

impl EmbeddingSeries {
    pub fn new(snapshots: Vec<EmbeddingSnapshot>) -> Result<Self> {
        if let Some(first) = snapshots.first() {
            for s in &snapshots {
                if s.vocab_size != first.vocab_size {
                    return Err(Error::ShapeMismatch {
                        expected: first.vocab_size,
                        found: s.vocab_size,
                    });
                }
                if s.dim != first.dim {
                    return Err(Error::ShapeMismatch {
                        expected: first.dim,
                        found: s.dim,
                    });
                }
            }
        }
        Ok(Self { snapshots })
    }

    pub fn weeks(&self) -> usize {
        self.snapshots.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.vocab_size)
    }

    pub fn dim(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.dim)
    }

    pub fn vector(&self, week: usize, word: usize) -> &[f64] {
        self.snapshots[week].row(word)
    }
}

/// Draws negatives from the unigram distribution raised to the 3/4 power.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cdf: Vec<f64>,
}

impl NegativeSampler {
    pub fn from_counts(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += powf(c as f64, 0.75);
                acc
            })
            .collect();
        if acc > 0.0 {
            cdf.iter_mut().for_each(|x| *x /= acc);
        }
        Self { cdf }
    }

    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        let counts: Vec<usize> = vocab.entries().iter().map(|e| e.token_count).collect();
        Self::from_counts(&counts)
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1)
    }
}

/// One SGD step on the logistic loss of `(center, context)` against the given
/// negatives. Context and negative rows are updated immediately; the center
/// row receives the accumulated gradient at the end, so every gradient term
/// is evaluated at the pre-step parameters. Returns the pair loss.
#[allow(clippy::too_many_arguments)]
pub fn sgns_step(
    input: &mut [f64],
    output: &mut [f64],
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    delta: &mut [f64],
) -> f64 {
    delta.iter_mut().for_each(|x| *x = 0.0);
    let u = &input[center * dim..(center + 1) * dim];
    let mut loss = 0.0;
    let targets = core::iter::once((context, true)).chain(negatives.iter().map(|&n| (n, false)));
    for (target, positive) in targets {
        let v = &mut output[target * dim..(target + 1) * dim];
        let score = dot(u, v);
        let (l, g) = if positive {
            (-log_sigmoid(score), sigmoid(score) - 1.0)
        } else {
            (-log_sigmoid(-score), sigmoid(score))
        };
        loss += l;
        axpy(-lr * g, v, delta);
        axpy(-lr * g, u, v);
    }
    axpy(1.0, delta, &mut input[center * dim..(center + 1) * dim]);
    loss
}

/// Loss of one `(center, context, negatives)` example; used by gradient checks.
pub fn sgns_loss(
    input: &[f64],
    output: &[f64],
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> f64 {
    let u = &input[center * dim..(center + 1) * dim];
    let pos = dot(u, &output[context * dim..(context + 1) * dim]);
    let mut loss = -log_sigmoid(pos);
    for &n in negatives {
        loss -= log_sigmoid(-dot(u, &output[n * dim..(n + 1) * dim]));
    }
    loss
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpochStats {
    pub loss_sum: f64,
    pub pairs: usize,
}

impl EpochStats {
    pub fn mean_loss(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.loss_sum / self.pairs as f64
        }
    }
}

/// Subsampling keep-probabilities per word, or `None` when disabled.
fn keep_probabilities(params: &EmbedParams, counts: &[usize]) -> Option<Vec<f64>> {
    if params.subsample <= 0.0 {
        return None;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return None;
    }
    Some(
        counts
            .iter()
            .map(|&c| {
                let f = c as f64 / total as f64;
                if f <= 0.0 {
                    1.0
                } else {
                    (sqrt(params.subsample / f) + params.subsample / f).min(1.0)
                }
            })
            .collect(),
    )
}

/// Trains over a set of posts at a fixed learning rate. This is the unit of
/// work shared by the sequential trainer and the sharded parallel trainer.
#[allow(clippy::too_many_arguments)]
pub fn train_posts<R: Rng>(
    input: &mut [f64],
    output: &mut [f64],
    dim: usize,
    posts: &[Vec<usize>],
    sampler: &NegativeSampler,
    keep: Option<&[f64]>,
    params: &EmbedParams,
    lr: f64,
    rng: &mut R,
) -> EpochStats {
    let mut stats = EpochStats::default();
    let mut delta = vec![0.0; dim];
    let mut negs = Vec::with_capacity(params.negatives);
    let mut sentence = Vec::new();
    for post in posts {
        sentence.clear();
        match keep {
            Some(k) => sentence.extend(post.iter().copied().filter(|&w| rng.gen::<f64>() < k[w])),
            None => sentence.extend_from_slice(post),
        }
        for (i, &center) in sentence.iter().enumerate() {
            let lo = i.saturating_sub(params.window);
            let hi = (i + params.window + 1).min(sentence.len());
            for (j, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                if j == i {
                    continue;
                }
                negs.clear();
                if sampler.len() > 1 {
                    for _ in 0..params.negatives {
                        let mut n = sampler.sample(rng);
                        let mut tries = 0;
                        while n == context && tries < 16 {
                            n = sampler.sample(rng);
                            tries += 1;
                        }
                        if n != context {
                            negs.push(n);
                        }
                    }
                }
                stats.loss_sum += sgns_step(input, output, dim, center, context, &negs, lr, &mut delta);
                stats.pairs += 1;
            }
        }
    }
    stats
}

/// Everything needed to run epochs for one vocabulary.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: EmbedParams,
    sampler: NegativeSampler,
    keep: Option<Vec<f64>>,
}

impl Trainer {
    pub fn new(vocab: &Vocabulary, params: EmbedParams) -> Result<Self> {
        params.validate()?;
        let counts: Vec<usize> = vocab.entries().iter().map(|e| e.token_count).collect();
        Ok(Self {
            keep: keep_probabilities(&params, &counts),
            sampler: NegativeSampler::from_counts(&counts),
            params,
        })
    }

    pub fn sampler(&self) -> &NegativeSampler {
        &self.sampler
    }

    pub fn keep_probabilities(&self) -> Option<&[f64]> {
        self.keep.as_deref()
    }

    /// Deterministic RNG stream for `(seed, week)`.
    pub fn week_rng(&self, week: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(week as u64 + 1);
        rng
    }

    /// One full pass over the bucket at the rate for `epoch`.
    pub fn train_epoch<R: Rng>(
        &self,
        snapshot: &mut EmbeddingSnapshot,
        bucket: &EncodedBucket,
        epoch: usize,
        rng: &mut R,
    ) -> EpochStats {
        let lr = self.params.learning_rate(epoch);
        train_posts(
            &mut snapshot.input,
            &mut snapshot.output,
            snapshot.dim,
            &bucket.posts,
            &self.sampler,
            self.keep.as_deref(),
            &self.params,
            lr,
            rng,
        )
    }

    /// Runs epochs from `start` until convergence or the cap. `epoch_fn`
    /// performs a single epoch, so callers can swap in a parallel epoch.
    pub fn run_until_converged<F>(
        &self,
        mut snapshot: EmbeddingSnapshot,
        bucket: &EncodedBucket,
        mut epoch_fn: F,
    ) -> EmbeddingSnapshot
    where
        F: FnMut(&mut EmbeddingSnapshot, &EncodedBucket, usize) -> EpochStats,
    {
        snapshot.week_index = bucket.week_index;
        snapshot.epochs_run = 0;
        snapshot.final_rho = 0.0;
        snapshot.cap_hit = false;
        snapshot.epoch_losses.clear();
        if bucket.token_count() == 0 {
            return snapshot;
        }
        let mut prev = snapshot.input.clone();
        for epoch in 0..self.params.max_epochs {
            let stats = epoch_fn(&mut snapshot, bucket, epoch);
            snapshot.epoch_losses.push(stats.mean_loss());
            snapshot.epochs_run = epoch + 1;
            let rho = epoch_angle(&prev, &snapshot.input, snapshot.dim)
                .map(|a| a.rho)
                .unwrap_or(f64::INFINITY);
            snapshot.final_rho = rho;
            if rho <= self.params.rho_threshold {
                return snapshot;
            }
            prev.copy_from_slice(&snapshot.input);
        }
        snapshot.cap_hit = true;
        snapshot
    }

    /// Fresh model trained on the first week.
    pub fn train_initial(&self, bucket: &EncodedBucket, vocab_size: usize) -> Result<EmbeddingSnapshot> {
        if bucket.post_count() == 0 {
            return Err(Error::EmptyBucket(bucket.week_index));
        }
        let init = EmbeddingSnapshot::initialize(vocab_size, self.params.dim, self.params.seed);
        let mut rng = self.week_rng(bucket.week_index);
        Ok(self.run_until_converged(init, bucket, |s, b, e| self.train_epoch(s, b, e, &mut rng)))
    }

    /// Warm-started model for a later week.
    pub fn train_incremental(&self, prev: &EmbeddingSnapshot, bucket: &EncodedBucket) -> EmbeddingSnapshot {
        let mut rng = self.week_rng(bucket.week_index);
        self.run_until_converged(prev.clone(), bucket, |s, b, e| self.train_epoch(s, b, e, &mut rng))
    }

    /// Trains every week in order, single-threaded.
    pub fn train_series(&self, buckets: &[EncodedBucket], vocab_size: usize) -> Result<EmbeddingSeries> {
        let Some(first) = buckets.first() else {
            return Err(Error::EmptyCorpus);
        };
        let mut snaps = Vec::with_capacity(buckets.len());
        snaps.push(self.train_initial(first, vocab_size)?);
        for bucket in &buckets[1..] {
            let next = self.train_incremental(snaps.last().expect("non-empty"), bucket);
            snaps.push(next);
        }
        EmbeddingSeries::new(snaps)
    }
}

/// Result of comparing two epochs' word matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleStats {
    /// Mean angle in radians over all rows.
    pub rho: f64,
    /// Rows with zero norm in either matrix; each contributes 0 to the mean.
    pub zero_rows: usize,
}

/// Mean angle between corresponding rows of two row-major matrices.
pub fn epoch_angle(prev: &[f64], cur: &[f64], dim: usize) -> Result<AngleStats> {
    if prev.len() != cur.len() {
        return Err(Error::ShapeMismatch {
            expected: prev.len(),
            found: cur.len(),
        });
    }
    if dim == 0 || prev.len() % dim != 0 {
        return Err(Error::InvalidParameter("matrix length is not a multiple of dim".into()));
    }
    let rows = prev.len() / dim;
    if rows == 0 {
        return Ok(AngleStats { rho: 0.0, zero_rows: 0 });
    }
    let mut total = 0.0;
    let mut zero_rows = 0;
    for (a, b) in prev.chunks_exact(dim).zip(cur.chunks_exact(dim)) {
        match cosine(a, b) {
            Some(c) => total += acos(c),
            None => zero_rows += 1,
        }
    }
    Ok(AngleStats {
        rho: total / rows as f64,
        zero_rows,
    })
}
