//! Multi-threaded embedding training.
//!
//! Each epoch splits the week's posts into contiguous shards. Every worker
//! trains a private copy of the matrices on its shard, and the per-worker
//! parameter deltas are summed into the shared model in shard order. No two
//! threads ever write the same memory, and the result is reproducible for a
//! fixed thread count.

use driftscope_core::corpus::EncodedBucket;
use driftscope_core::embeddings::{train_posts, EmbeddingSeries, EmbeddingSnapshot, EpochStats, Trainer};
use driftscope_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shard_rng(seed: u64, week: usize, epoch: usize, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((epoch as u64) << 32) ^ shard as u64);
    rng.set_stream(week as u64 + 1);
    rng
}

/// One epoch over `bucket` using `threads` workers.
pub fn parallel_epoch(
    trainer: &Trainer,
    snapshot: &mut EmbeddingSnapshot,
    bucket: &EncodedBucket,
    epoch: usize,
    threads: usize,
) -> EpochStats {
    let threads = threads.max(1).min(bucket.posts.len().max(1));
    let lr = trainer.params.learning_rate(epoch);
    let chunk = bucket.posts.len().div_ceil(threads).max(1);
    let dim = snapshot.dim;
    let base_in = &snapshot.input;
    let base_out = &snapshot.output;
    let results: Vec<(Vec<f64>, Vec<f64>, EpochStats)> = std::thread::scope(|scope| {
        let handles: Vec<_> = bucket
            .posts
            .chunks(chunk)
            .enumerate()
            .map(|(shard, posts)| {
                scope.spawn(move || {
                    let mut input = base_in.clone();
                    let mut output = base_out.clone();
                    let mut rng = shard_rng(trainer.params.seed, bucket.week_index, epoch, shard);
                    let stats = train_posts(
                        &mut input,
                        &mut output,
                        dim,
                        posts,
                        trainer.sampler(),
                        trainer.keep_probabilities(),
                        &trainer.params,
                        lr,
                        &mut rng,
                    );
                    (input, output, stats)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let start_in = snapshot.input.clone();
    let start_out = snapshot.output.clone();
    let mut total = EpochStats::default();
    for (input, output, stats) in results {
        for ((dst, new), old) in snapshot.input.iter_mut().zip(&input).zip(&start_in) {
            *dst += new - old;
        }
        for ((dst, new), old) in snapshot.output.iter_mut().zip(&output).zip(&start_out) {
            *dst += new - old;
        }
        total.loss_sum += stats.loss_sum;
        total.pairs += stats.pairs;
    }
    total
}

/// Trains every week, single-threaded when `threads <= 1`.
pub fn train_series(trainer: &Trainer, buckets: &[EncodedBucket], vocab_size: usize, threads: usize) -> Result<EmbeddingSeries> {
    if threads <= 1 {
        return trainer.train_series(buckets, vocab_size);
    }
    let Some(first) = buckets.first() else {
        return Err(Error::EmptyCorpus);
    };
    if first.post_count() == 0 {
        return Err(Error::EmptyBucket(first.week_index));
    }
    let mut snaps: Vec<EmbeddingSnapshot> = Vec::with_capacity(buckets.len());
    let init = EmbeddingSnapshot::initialize(vocab_size, trainer.params.dim, trainer.params.seed);
    for (i, bucket) in buckets.iter().enumerate() {
        let start = if i == 0 { init.clone() } else { snaps[i - 1].clone() };
        let next = trainer.run_until_converged(start, bucket, |s, b, e| parallel_epoch(trainer, s, b, e, threads));
        if !next.is_finite() {
            return Err(Error::Diverged { epoch: next.epochs_run });
        }
        snaps.push(next);
    }
    EmbeddingSeries::new(snaps)
}
