//! The analysis stages, from posts to a complete bundle.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Context, Result};
use driftscope_core::clustering::{cluster_report, cluster_trajectories, ClusterConfig};
use driftscope_core::corpus::{bucket_posts, build_vocabulary, EncodedBucket, Post, Vocabulary, WeekBucket, WeekClock};
use driftscope_core::dynamics::build_shift_series;
use driftscope_core::embeddings::{EmbedParams, EmbeddingSeries, Trainer};
use driftscope_core::forecast::{build_dataset, cross_validate, rows_from, ForecastReport, ForecastTask, ModelKind, ModelSpec};
use driftscope_core::usage::build_usage_series;

use crate::bundle::{Bundle, ClusterFile, ForecastKey, Meta, RegionData, Stat};
use crate::io::{ForecastConfig, IngestStats, PipelineConfig};
use crate::parallel;
use crate::snapshot::round_to_stored;

/// Trains the week-by-week embedding series and rounds it to the stored
/// precision.
pub fn train_embeddings(vocab: &Vocabulary, encoded: &[EncodedBucket], params: &EmbedParams, threads: usize) -> Result<EmbeddingSeries> {
    let trainer = Trainer::new(vocab, params.clone())?;
    let mut series = parallel::train_series(&trainer, encoded, vocab.len(), threads)?;
    for s in &mut series.snapshots {
        round_to_stored(s);
    }
    for s in &series.snapshots {
        if s.cap_hit {
            log::warn!("week {}: epoch cap reached with rho {:.3e}", s.week_index, s.final_rho);
        } else {
            log::info!("week {}: converged after {} epochs (rho {:.3e})", s.week_index, s.epochs_run, s.final_rho);
        }
    }
    Ok(series)
}

fn pad_buckets(mut buckets: Vec<WeekBucket>, weeks: usize) -> Vec<WeekBucket> {
    while buckets.len() < weeks {
        buckets.push(WeekBucket {
            week_index: buckets.len(),
            posts: Vec::new(),
        });
    }
    buckets
}

/// Buckets, vocabulary, usage and embeddings for the whole corpus and, when
/// enabled, for each region over the shared vocabulary.
pub fn embed_stage(posts: Vec<Post>, stats: IngestStats, stopwords: &BTreeSet<String>, cfg: &PipelineConfig) -> Result<Bundle> {
    let clock: WeekClock = cfg.clock()?;
    let region_names: BTreeSet<String> = if cfg.regions {
        posts.iter().filter_map(|p| p.region.clone()).collect()
    } else {
        BTreeSet::new()
    };
    let mut by_region: BTreeMap<String, Vec<Post>> = BTreeMap::new();
    if !region_names.is_empty() {
        for p in &posts {
            if let Some(r) = &p.region {
                by_region.entry(r.clone()).or_default().push(p.clone());
            }
        }
    }
    let (buckets, before_origin) = bucket_posts(posts, clock)?;
    if before_origin > 0 {
        log::warn!("{before_origin} posts precede the week origin and were dropped");
    }
    let weeks = buckets.len();
    if weeks < 2 {
        bail!("corpus spans {weeks} week(s); at least 2 are needed");
    }
    let vocab = build_vocabulary(&buckets, cfg.min_post_freq, stopwords)?;
    if vocab.len() < 2 {
        bail!("vocabulary has {} word(s) after filtering", vocab.len());
    }
    log::info!("{} weeks, {} words in vocabulary", weeks, vocab.len());
    let encoded: Vec<EncodedBucket> = buckets.iter().map(|b| vocab.encode_bucket(b)).collect();
    let usage = build_usage_series(&encoded, &vocab)?;
    let embeddings = train_embeddings(&vocab, &encoded, &cfg.embed, cfg.threads)?;

    let mut regions = BTreeMap::new();
    for (name, rposts) in by_region {
        let (rb, _) = bucket_posts(rposts, clock)?;
        let rb = pad_buckets(rb, weeks);
        let renc: Vec<EncodedBucket> = rb.iter().map(|b| vocab.encode_bucket(b)).collect();
        let rusage = build_usage_series(&renc, &vocab)?;
        let remb = if renc[0].post_count() == 0 {
            log::warn!("region {name} has no posts in week 0; skipping its embeddings");
            None
        } else {
            log::info!("training embeddings for region {name}");
            Some(train_embeddings(&vocab, &renc, &cfg.embed, cfg.threads)?)
        };
        regions.insert(
            name,
            RegionData {
                usage: rusage,
                shift: None,
                embeddings: remb,
            },
        );
    }

    let meta = Meta {
        weeks,
        week_origin: cfg.week_origin,
        week_len_seconds: cfg.week_len_seconds,
        vocab_size: vocab.len(),
        dim: cfg.embed.dim,
        seed: cfg.embed.seed,
        regions: regions.keys().cloned().collect(),
        posts_per_week: buckets.iter().map(WeekBucket::post_count).collect(),
        malformed_records: stats.malformed,
        cap_hits: embeddings.snapshots.iter().filter(|s| s.cap_hit).count(),
    };
    Ok(Bundle {
        meta,
        vocab,
        usage,
        embeddings,
        shift: None,
        clusters: BTreeMap::new(),
        forecasts: BTreeMap::new(),
        regions,
    })
}

/// Difference series for the corpus and every region with embeddings.
pub fn dynamics_stage(bundle: &mut Bundle) -> Result<()> {
    bundle.shift = Some(build_shift_series(&bundle.usage, &bundle.embeddings)?);
    for (name, r) in &mut bundle.regions {
        if let Some(e) = &r.embeddings {
            r.shift = Some(build_shift_series(&r.usage, e).with_context(|| format!("region {name}"))?);
        }
    }
    Ok(())
}

pub fn cluster_stage(bundle: &Bundle, stat: Stat, cfg: &ClusterConfig) -> Result<ClusterFile> {
    let series = stat.series(bundle.shift()?);
    let clustering = cluster_trajectories(&series, cfg)?;
    let report = cluster_report(&clustering, &bundle.vocab, 10);
    Ok(ClusterFile { stat, clustering, report })
}

pub fn model_spec(kind: ModelKind, cfg: &ForecastConfig) -> ModelSpec {
    match kind {
        ModelKind::Baseline => ModelSpec::Persistence,
        ModelKind::Adaboost => ModelSpec::BoostedTrees(cfg.boost.clone()),
        ModelKind::Lstm => ModelSpec::Lstm(cfg.lstm.clone()),
    }
}

/// Cross-validated forecast for one task/horizon/model, optionally on a
/// region's series.
pub fn forecast_stage(bundle: &Bundle, key: ForecastKey, cfg: &ForecastConfig, region: Option<&str>, keywords: &[String]) -> Result<ForecastReport> {
    let (shift, usage) = match region {
        None => (bundle.shift()?, &bundle.usage),
        Some(name) => {
            let r = bundle.regions.get(name).with_context(|| format!("unknown region {name}"))?;
            let s = r.shift.as_ref().with_context(|| format!("region {name} has no dynamics"))?;
            (s, &r.usage)
        }
    };
    let rows = rows_from(shift, usage);
    let task = ForecastTask {
        source: key.task,
        horizon: key.horizon,
    };
    let dataset = build_dataset(&rows, task, cfg.folds, cfg.seed)?;
    let mut ids = Vec::new();
    for kw in keywords {
        match bundle.vocab.id(kw) {
            Some(id) => ids.push(id),
            None => log::warn!("keyword {kw:?} is not in the vocabulary"),
        }
    }
    let report = cross_validate(&dataset, &model_spec(key.model, cfg), &ids)?;
    Ok(report)
}

pub fn forecast_grid(cfg: &ForecastConfig) -> Vec<ForecastKey> {
    let mut keys = Vec::new();
    for &task in &cfg.tasks {
        for &horizon in &cfg.horizons {
            for &model in &cfg.models {
                keys.push(ForecastKey { task, horizon, model });
            }
        }
    }
    keys
}

/// Every forecast in the configured grid. Horizons the series are too short
/// for are skipped with a warning.
pub fn forecast_all(bundle: &Bundle, cfg: &ForecastConfig, threads: usize) -> Result<BTreeMap<ForecastKey, ForecastReport>> {
    let keys = forecast_grid(cfg);
    let run = |key: ForecastKey| -> Result<Option<ForecastReport>> {
        match forecast_stage(bundle, key, cfg, None, &cfg.keywords) {
            Ok(r) => Ok(Some(r)),
            Err(e) => match e.downcast_ref::<driftscope_core::Error>() {
                Some(driftscope_core::Error::SeriesTooShort { .. }) | Some(driftscope_core::Error::NotEnoughWords { .. }) => {
                    log::warn!("skipping forecast {key:?}: {e}");
                    Ok(None)
                }
                _ => Err(e.context(format!("forecast {key:?}"))),
            },
        }
    };
    let results: Vec<Result<Option<ForecastReport>>> = if threads <= 1 {
        keys.iter().map(|&k| run(k)).collect()
    } else {
        let chunk = keys.len().div_ceil(threads).max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> = keys
                .chunks(chunk)
                .map(|ks| scope.spawn(move || ks.iter().map(|&k| run(k)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("forecast worker panicked")).collect()
        })
    };
    let mut out = BTreeMap::new();
    for r in results {
        if let Some(report) = r? {
            out.insert(ForecastKey::of(&report), report);
        }
    }
    Ok(out)
}

/// Embeddings, dynamics, clusters for every statistic and the forecast grid.
pub fn run_pipeline(posts: Vec<Post>, stats: IngestStats, stopwords: &BTreeSet<String>, cfg: &PipelineConfig) -> Result<Bundle> {
    let mut bundle = embed_stage(posts, stats, stopwords, cfg)?;
    dynamics_stage(&mut bundle)?;
    for stat in Stat::ALL {
        match cluster_stage(&bundle, stat, &cfg.cluster) {
            Ok(c) => {
                bundle.clusters.insert(stat, c);
            }
            Err(e) => log::warn!("clustering {} failed: {e}", stat.as_str()),
        }
    }
    bundle.forecasts = forecast_all(&bundle, &cfg.forecast, cfg.threads)?;
    Ok(bundle)
}
