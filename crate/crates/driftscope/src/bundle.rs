//! On-disk analysis bundle: every precomputed artifact the service reads.
//!
//! ```text
//! meta.json  vocab.json  usage.json  usage.csv  dynamics.json  dynamics.csv
//! embeddings/week_XXX.{bin,json}
//! clusters_{f,chi,e}.json
//! forecasts/{task}_h{n}_{model}.json
//! regions/{name}/{usage.json, dynamics.json, embeddings/...}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use driftscope_core::clustering::{ReportRow, TrajectoryClustering};
use driftscope_core::corpus::{VocabEntry, Vocabulary};
use driftscope_core::dynamics::ShiftSeries;
use driftscope_core::embeddings::{EmbeddingSeries, EmbeddingSnapshot};
use driftscope_core::forecast::{ForecastReport, ModelKind, TaskSource};
use driftscope_core::usage::UsageSeries;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::snapshot;

/// Which difference series a clustering was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    F,
    Chi,
    E,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::F, Stat::Chi, Stat::E];

    pub fn as_str(self) -> &'static str {
        match self {
            Stat::F => "f",
            Stat::Chi => "chi",
            Stat::E => "e",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }

    /// `(id, series)` pairs; usage statistics skip stopwords.
    pub fn series(self, shift: &ShiftSeries) -> Vec<(usize, Vec<f64>)> {
        shift
            .words
            .iter()
            .filter(|w| self == Stat::E || w.usage_tracked)
            .map(|w| {
                let s = match self {
                    Stat::F => &w.d_f,
                    Stat::Chi => &w.d_chi,
                    Stat::E => &w.d_e,
                };
                (w.id, s.clone())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub weeks: usize,
    pub week_origin: i64,
    pub week_len_seconds: i64,
    pub vocab_size: usize,
    pub dim: usize,
    pub seed: u64,
    pub regions: Vec<String>,
    pub posts_per_week: Vec<usize>,
    pub malformed_records: usize,
    pub cap_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub stat: Stat,
    pub clustering: TrajectoryClustering,
    pub report: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForecastKey {
    pub task: TaskSource,
    pub horizon: usize,
    pub model: ModelKind,
}

impl ForecastKey {
    pub fn file_name(&self) -> String {
        format!("{}_h{}_{}.json", self.task.as_str(), self.horizon, self.model.as_str())
    }

    pub fn of(report: &ForecastReport) -> Self {
        Self {
            task: report.task.source,
            horizon: report.task.horizon,
            model: report.model,
        }
    }
}

/// Usage, shift and (optionally) embeddings restricted to one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionData {
    pub usage: UsageSeries,
    pub shift: Option<ShiftSeries>,
    pub embeddings: Option<EmbeddingSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub meta: Meta,
    pub vocab: Vocabulary,
    pub usage: UsageSeries,
    pub embeddings: EmbeddingSeries,
    pub shift: Option<ShiftSeries>,
    pub clusters: BTreeMap<Stat, ClusterFile>,
    pub forecasts: BTreeMap<ForecastKey, ForecastReport>,
    pub regions: BTreeMap<String, RegionData>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn usage_csv(usage: &UsageSeries, vocab: &Vocabulary) -> String {
    let mut s = String::from("word,t,tau_f,tau_chi\n");
    for w in &usage.words {
        for t in 0..usage.weeks {
            let _ = writeln!(s, "{},{},{},{}", vocab.word(w.id), t, w.tau_f[t], w.tau_chi[t]);
        }
    }
    s
}

/// One row per word and week; difference columns are empty at the last week.
pub fn dynamics_csv(shift: &ShiftSeries, vocab: &Vocabulary) -> String {
    let mut s = String::from("word,t,d_f,d_chi,d_e,cum\n");
    for w in &shift.words {
        for t in 0..shift.weeks {
            let _ = write!(s, "{},{},", vocab.word(w.id), t);
            if t + 1 < shift.weeks {
                let _ = write!(s, "{},{},{},", w.d_f[t], w.d_chi[t], w.d_e[t]);
            } else {
                s.push_str(",,,");
            }
            let _ = writeln!(s, "{}", w.cum[t]);
        }
    }
    s
}

fn write_embeddings(dir: &Path, series: &EmbeddingSeries, seed: u64) -> Result<()> {
    let dir = dir.join("embeddings");
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    for snap in &series.snapshots {
        snapshot::write(&dir, snap, seed)?;
    }
    Ok(())
}

fn read_embeddings(dir: &Path, weeks: usize) -> Result<EmbeddingSeries> {
    let dir = dir.join("embeddings");
    let mut snaps: Vec<EmbeddingSnapshot> = Vec::with_capacity(weeks);
    for t in 0..weeks {
        let (_, snap) = snapshot::read(&dir, t)?;
        ensure!(snap.week_index == t, "snapshot week_{t:03} claims week {}", snap.week_index);
        snaps.push(snap);
    }
    Ok(EmbeddingSeries::new(snaps)?)
}

pub fn region_dir(root: &Path, region: &str) -> PathBuf {
    root.join("regions").join(region)
}

impl Bundle {
    pub fn weeks(&self) -> usize {
        self.meta.weeks
    }

    pub fn shift(&self) -> Result<&ShiftSeries> {
        self.shift.as_ref().context("dynamics have not been computed")
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.vocab.id(word)
    }

    /// Writes every present component. Existing files for absent optional
    /// components are left alone.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("meta.json"), &self.meta)?;
        write_json(&dir.join("vocab.json"), &self.vocab.entries())?;
        write_json(&dir.join("usage.json"), &self.usage)?;
        fs::write(dir.join("usage.csv"), usage_csv(&self.usage, &self.vocab))?;
        write_embeddings(dir, &self.embeddings, self.meta.seed)?;
        if let Some(shift) = &self.shift {
            self.save_dynamics(dir, shift)?;
        }
        for c in self.clusters.values() {
            write_json(&dir.join(format!("clusters_{}.json", c.stat.as_str())), c)?;
        }
        for r in self.forecasts.values() {
            save_forecast(dir, r)?;
        }
        for (name, region) in &self.regions {
            let rdir = region_dir(dir, name);
            fs::create_dir_all(&rdir)?;
            write_json(&rdir.join("usage.json"), &region.usage)?;
            if let Some(e) = &region.embeddings {
                write_embeddings(&rdir, e, self.meta.seed)?;
            }
            if let Some(s) = &region.shift {
                write_json(&rdir.join("dynamics.json"), s)?;
            }
        }
        Ok(())
    }

    pub fn save_dynamics(&self, dir: &Path, shift: &ShiftSeries) -> Result<()> {
        write_json(&dir.join("dynamics.json"), shift)?;
        fs::write(dir.join("dynamics.csv"), dynamics_csv(shift, &self.vocab))?;
        Ok(())
    }

    pub fn save_clusters(&self, dir: &Path, file: &ClusterFile) -> Result<()> {
        write_json(&dir.join(format!("clusters_{}.json", file.stat.as_str())), file)
    }

    /// Loads whatever is present and checks that all parts agree on the
    /// vocabulary and the number of weeks.
    pub fn load(dir: &Path) -> Result<Self> {
        ensure!(dir.is_dir(), "bundle directory {} does not exist", dir.display());
        let meta: Meta = read_json(&dir.join("meta.json"))?;
        let entries: Vec<VocabEntry> = read_json(&dir.join("vocab.json"))?;
        let vocab = Vocabulary::from_entries(entries);
        let usage: UsageSeries = read_json(&dir.join("usage.json"))?;
        let embeddings = read_embeddings(dir, meta.weeks)?;
        let shift_path = dir.join("dynamics.json");
        let shift = if shift_path.exists() {
            Some(read_json::<ShiftSeries>(&shift_path)?)
        } else {
            None
        };
        let mut clusters = BTreeMap::new();
        for stat in Stat::ALL {
            let p = dir.join(format!("clusters_{}.json", stat.as_str()));
            if p.exists() {
                let c: ClusterFile = read_json(&p)?;
                ensure!(c.stat == stat, "{} holds clusters for {:?}", p.display(), c.stat);
                clusters.insert(stat, c);
            }
        }
        let mut forecasts = BTreeMap::new();
        let fdir = dir.join("forecasts");
        if fdir.is_dir() {
            let mut paths: Vec<PathBuf> = fs::read_dir(&fdir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for p in paths {
                let r: ForecastReport = read_json(&p)?;
                forecasts.insert(ForecastKey::of(&r), r);
            }
        }
        let mut regions = BTreeMap::new();
        for name in &meta.regions {
            let rdir = region_dir(dir, name);
            let usage: UsageSeries = read_json(&rdir.join("usage.json"))?;
            let sp = rdir.join("dynamics.json");
            let shift = if sp.exists() { Some(read_json(&sp)?) } else { None };
            let embeddings = if rdir.join("embeddings").is_dir() {
                Some(read_embeddings(&rdir, meta.weeks)?)
            } else {
                None
            };
            regions.insert(
                name.clone(),
                RegionData {
                    usage,
                    shift,
                    embeddings,
                },
            );
        }
        let bundle = Self {
            meta,
            vocab,
            usage,
            embeddings,
            shift,
            clusters,
            forecasts,
            regions,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.vocab.len();
        let t = self.meta.weeks;
        ensure!(self.meta.vocab_size == v, "meta says {} words, vocabulary has {v}", self.meta.vocab_size);
        check_usage(&self.usage, v, t, "usage")?;
        ensure!(self.embeddings.weeks() == t, "embeddings cover {} weeks, expected {t}", self.embeddings.weeks());
        ensure!(
            self.embeddings.vocab_size() == v,
            "embeddings have {} rows, vocabulary has {v}",
            self.embeddings.vocab_size()
        );
        if let Some(s) = &self.shift {
            check_shift(s, v, t, "dynamics")?;
        }
        for c in self.clusters.values() {
            if let Some(&bad) = c.clustering.word_ids.iter().find(|&&id| id >= v) {
                bail!("clusters_{} refers to word id {bad} outside the vocabulary", c.stat.as_str());
            }
        }
        for r in self.forecasts.values() {
            if let Some(p) = r.predictions.iter().find(|p| p.id >= v) {
                bail!("forecast refers to word id {} outside the vocabulary", p.id);
            }
        }
        for (name, r) in &self.regions {
            check_usage(&r.usage, v, t, name)?;
            if let Some(s) = &r.shift {
                check_shift(s, v, t, name)?;
            }
            if let Some(e) = &r.embeddings {
                ensure!(e.weeks() == t && e.vocab_size() == v, "region {name} embeddings do not match the bundle");
            }
        }
        Ok(())
    }
}

fn check_usage(u: &UsageSeries, v: usize, t: usize, what: &str) -> Result<()> {
    ensure!(u.weeks == t, "{what}: {} weeks, expected {t}", u.weeks);
    for w in &u.words {
        ensure!(w.id < v, "{what}: word id {} outside the vocabulary", w.id);
        ensure!(w.tau_f.len() == t && w.tau_chi.len() == t, "{what}: series length mismatch for id {}", w.id);
    }
    Ok(())
}

fn check_shift(s: &ShiftSeries, v: usize, t: usize, what: &str) -> Result<()> {
    ensure!(s.weeks == t, "{what}: dynamics cover {} weeks, expected {t}", s.weeks);
    ensure!(s.words.len() == v, "{what}: dynamics for {} words, vocabulary has {v}", s.words.len());
    for w in &s.words {
        ensure!(w.d_e.len() + 1 == t && w.cum.len() == t, "{what}: series length mismatch for id {}", w.id);
    }
    Ok(())
}

pub fn save_forecast(dir: &Path, report: &ForecastReport) -> Result<()> {
    let fdir = dir.join("forecasts");
    fs::create_dir_all(&fdir)?;
    write_json(&fdir.join(ForecastKey::of(report).file_name()), report)
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}
