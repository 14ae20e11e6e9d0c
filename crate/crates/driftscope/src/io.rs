//! JSONL ingestion, stopword files and the TOML pipeline configuration.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use driftscope_core::clustering::ClusterConfig;
use driftscope_core::corpus::{bucket_posts, tokenize_normalize, IdentityStemmer, Post, Stemmer, SuffixStemmer, WeekBucket, WeekClock};
use driftscope_core::embeddings::EmbedParams;
use driftscope_core::forecast::{BoostParams, LstmParams, ModelKind, TaskSource};
use driftscope_core::synth::SynthRecord;
use serde::{Deserialize, Serialize};

/// One input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(default)]
    pub region: Option<String>,
}

impl From<SynthRecord> for RawRecord {
    fn from(r: SynthRecord) -> Self {
        Self {
            id: r.id,
            timestamp: r.timestamp,
            text: r.text,
            region: r.region,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: usize,
    pub malformed: usize,
    pub before_origin: usize,
}

/// Parses every non-blank line; lines that are not valid records are counted
/// and skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<(Vec<RawRecord>, usize)> {
    let mut out = Vec::new();
    let mut malformed = 0;
    for (n, line) in reader.lines().enumerate() {
        let line = line.with_context(|| format!("reading line {}", n + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => {
                log::debug!("skipping line {}: {e}", n + 1);
                malformed += 1;
            }
        }
    }
    Ok((out, malformed))
}

pub fn read_records_file(path: &Path) -> Result<(Vec<RawRecord>, usize)> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(BufReader::new(f))
}

pub fn to_posts(records: Vec<RawRecord>, stemmer: &dyn Stemmer) -> Vec<Post> {
    records
        .into_iter()
        .map(|r| Post {
            tokens: tokenize_normalize(&r.text, stemmer),
            post_id: r.id,
            timestamp: r.timestamp,
            region: r.region,
        })
        .collect()
}

/// Records to weekly buckets. Fails only when nothing valid remains.
pub fn ingest<R: BufRead>(reader: R, stemmer: &dyn Stemmer, clock: WeekClock) -> Result<(Vec<WeekBucket>, IngestStats)> {
    let (records, malformed) = read_records(reader)?;
    let n = records.len();
    let (buckets, before_origin) = bucket_posts(to_posts(records, stemmer), clock)?;
    Ok((
        buckets,
        IngestStats {
            records: n,
            malformed,
            before_origin,
        },
    ))
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// One word per line; blank lines and `#` comments ignored. Entries pass
/// through the same normalization as post text.
pub fn read_stopwords(path: &Path, stemmer: &dyn Stemmer) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading stopwords {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(|l| tokenize_normalize(l, stemmer))
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    #[default]
    Suffix,
    Identity,
}

impl StemmerKind {
    pub fn build(self) -> Box<dyn Stemmer + Send + Sync> {
        match self {
            StemmerKind::Suffix => Box::new(SuffixStemmer::default()),
            StemmerKind::Identity => Box::new(IdentityStemmer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub tasks: Vec<TaskSource>,
    pub horizons: Vec<usize>,
    pub models: Vec<ModelKind>,
    pub folds: usize,
    pub seed: u64,
    pub boost: BoostParams,
    pub lstm: LstmParams,
    pub keywords: Vec<String>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            tasks: TaskSource::ALL.to_vec(),
            horizons: vec![1, 2, 3],
            models: ModelKind::ALL.to_vec(),
            folds: 4,
            seed: 0,
            boost: BoostParams::default(),
            lstm: LstmParams::default(),
            keywords: Vec::new(),
        }
    }
}

/// Everything the pipeline reads from the config file. Unlisted keys take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub week_origin: i64,
    pub week_len_seconds: i64,
    pub min_post_freq: usize,
    pub stopword_file: Option<PathBuf>,
    pub stemmer: StemmerKind,
    /// Worker threads for embedding training; 1 is the reproducible mode.
    pub threads: usize,
    /// Also compute per-region usage, embeddings and dynamics.
    pub regions: bool,
    pub embed: EmbedParams,
    pub cluster: ClusterConfig,
    pub forecast: ForecastConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            week_origin: 0,
            week_len_seconds: WeekClock::WEEK_SECONDS,
            min_post_freq: 5,
            stopword_file: None,
            stemmer: StemmerKind::Suffix,
            threads: 1,
            regions: true,
            embed: EmbedParams::default(),
            cluster: ClusterConfig::default(),
            forecast: ForecastConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Relative stopword paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(sw) = &cfg.stopword_file {
            if sw.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.stopword_file = Some(dir.join(sw));
                }
            }
        }
        Ok(cfg)
    }

    pub fn clock(&self) -> Result<WeekClock> {
        Ok(WeekClock::new(self.week_origin, self.week_len_seconds)?)
    }

    pub fn stopwords(&self, stemmer: &dyn Stemmer) -> Result<BTreeSet<String>> {
        match &self.stopword_file {
            Some(p) => read_stopwords(p, stemmer),
            None => Ok(BTreeSet::new()),
        }
    }
}
