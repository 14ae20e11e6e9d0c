#![allow(dead_code)]

use std::collections::BTreeSet;

use driftscope::bundle::Bundle;
use driftscope::io::{to_posts, IngestStats, PipelineConfig, RawRecord, StemmerKind};
use driftscope::pipeline::run_pipeline;
use driftscope_core::corpus::IdentityStemmer;
use driftscope_core::forecast::{LstmParams, ModelKind};
use driftscope_core::synth::{generate_corpus, topic_word, FrequencyEntry, ShiftEntry, SynthSpec};
use driftscope_core::clustering::Trend;

/// A corpus small enough to run the whole pipeline in a few seconds.
pub fn small_spec() -> SynthSpec {
    SynthSpec {
        topics: (0..3).map(|k| (0..20).map(|j| topic_word(k, j)).collect()).collect(),
        posts_per_week: vec![300; 8],
        tokens_per_post: 10,
        shifts: vec![
            ShiftEntry { word: topic_word(0, 0), source: 0, target: 1, switch_week: 3, ramp: 2 },
            ShiftEntry { word: topic_word(1, 0), source: 1, target: 2, switch_week: 4, ramp: 1 },
        ],
        frequency: vec![
            FrequencyEntry { word: topic_word(0, 5), trend: Trend::Increase, rate: 2.0, onset: None },
            FrequencyEntry { word: topic_word(1, 5), trend: Trend::Decrease, rate: 2.0, onset: None },
        ],
        seed: 5,
        ..SynthSpec::default()
    }
}

pub fn small_config() -> PipelineConfig {
    let mut cfg = PipelineConfig {
        stemmer: StemmerKind::Identity,
        min_post_freq: 3,
        threads: 1,
        regions: true,
        ..PipelineConfig::default()
    };
    cfg.embed.dim = 12;
    cfg.forecast.horizons = vec![1, 2];
    cfg.forecast.models = ModelKind::ALL.to_vec();
    cfg.forecast.lstm = LstmParams { hidden: 8, epochs: 20, ..LstmParams::default() };
    cfg.forecast.boost.n_estimators = 10;
    cfg.forecast.keywords = vec![topic_word(0, 0), topic_word(1, 0)];
    cfg
}

pub fn stopwords() -> BTreeSet<String> {
    [topic_word(2, 19)].into_iter().collect()
}

pub fn build_bundle(spec: &SynthSpec, cfg: &PipelineConfig) -> Bundle {
    let (records, _) = generate_corpus(spec).expect("valid spec");
    let raw: Vec<RawRecord> = records.into_iter().map(RawRecord::from).collect();
    let stats = IngestStats { records: raw.len(), ..IngestStats::default() };
    let posts = to_posts(raw, &IdentityStemmer);
    run_pipeline(posts, stats, &stopwords(), cfg).expect("pipeline runs")
}
