//! Synthetic corpora with planted topics, representation shifts and
//! frequency trends, plus synthetic difference series for forecasting and
//! clustering checks.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::Trend;
use crate::corpus::WeekClock;
use crate::forecast::SeriesRow;
use crate::math::{cos, ln, powf, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftEntry {
    pub word: String,
    pub source: usize,
    pub target: usize,
    pub switch_week: usize,
    /// Weeks taken to move fully into the target topic; 0 or 1 is a step.
    pub ramp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub word: String,
    pub trend: Trend,
    /// Multiplier reached at the end of the schedule (or after `onset`).
    pub rate: f64,
    /// Step change at this week instead of a gradual one.
    #[serde(default)]
    pub onset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub topics: Vec<Vec<String>>,
    /// One entry per week; its length is T.
    pub posts_per_week: Vec<usize>,
    pub tokens_per_post: usize,
    pub shifts: Vec<ShiftEntry>,
    pub frequency: Vec<FrequencyEntry>,
    pub regions: Vec<String>,
    pub week_origin: i64,
    pub seed: u64,
}

pub fn topic_word(topic: usize, index: usize) -> String {
    format!("t{topic}w{index:02}")
}

impl Default for SynthSpec {
    /// 4 topics of 60 words, 5000 posts a week for 12 weeks, 10 shifted
    /// words and 10 words per frequency trend.
    fn default() -> Self {
        let n_topics = 4;
        let topics = (0..n_topics)
            .map(|k| (0..60).map(|j| topic_word(k, j)).collect())
            .collect();
        let shifts = (0..10)
            .map(|i| ShiftEntry {
                word: topic_word(i % n_topics, i / n_topics),
                source: i % n_topics,
                target: (i + 1) % n_topics,
                switch_week: 4 + i % 5,
                ramp: 2,
            })
            .collect();
        let mut frequency = Vec::new();
        for (base, trend, rate) in [(10, Trend::Increase, 2.0), (20, Trend::Decrease, 2.0), (30, Trend::Flatline, 1.0)] {
            for i in 0..10 {
                frequency.push(FrequencyEntry {
                    word: topic_word(i % n_topics, base + i / n_topics),
                    trend,
                    rate,
                    onset: None,
                });
            }
        }
        Self {
            topics,
            posts_per_week: vec![5000; 12],
            tokens_per_post: 12,
            shifts,
            frequency,
            regions: vec![String::from("RU"), String::from("UA")],
            week_origin: 0,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn weeks(&self) -> usize {
        self.posts_per_week.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() {
            return Err(Error::EmptyTopic(0));
        }
        if let Some(k) = self.topics.iter().position(|t| t.is_empty()) {
            return Err(Error::EmptyTopic(k));
        }
        let t = self.weeks();
        if t == 0 {
            return Err(Error::InvalidParameter("posts_per_week is empty".into()));
        }
        if self.tokens_per_post == 0 {
            return Err(Error::InvalidParameter("tokens_per_post must be positive".into()));
        }
        for s in &self.shifts {
            if s.source >= self.topics.len() || s.target >= self.topics.len() || s.source == s.target {
                return Err(Error::InvalidParameter(format!("bad topics for shift word {}", s.word)));
            }
            if !self.topics[s.source].contains(&s.word) {
                return Err(Error::InvalidParameter(format!("{} is not in topic {}", s.word, s.source)));
            }
            if s.switch_week == 0 || s.switch_week >= t {
                return Err(Error::InvalidParameter(format!("switch week of {} outside (0, T)", s.word)));
            }
        }
        for f in &self.frequency {
            if !(f.rate > 0.0 && f.rate.is_finite()) {
                return Err(Error::InvalidParameter(format!("rate of {} must be positive", f.word)));
            }
            if !self.topics.iter().any(|tp| tp.contains(&f.word)) {
                return Err(Error::InvalidParameter(format!("{} is not in any topic", f.word)));
            }
            if matches!(f.onset, Some(o) if o == 0 || o >= t) {
                return Err(Error::InvalidParameter(format!("onset of {} outside (0, T)", f.word)));
            }
        }
        Ok(())
    }

    /// Share of a shift word's weight that sits in its target topic.
    pub fn shift_progress(entry: &ShiftEntry, week: usize) -> f64 {
        if week < entry.switch_week {
            return 0.0;
        }
        let ramp = entry.ramp.max(1) as f64;
        ((week - entry.switch_week + 1) as f64 / ramp).min(1.0)
    }

    /// Sampling-weight multiplier of a frequency word.
    pub fn frequency_multiplier(&self, entry: &FrequencyEntry, week: usize) -> f64 {
        let progress = match entry.onset {
            Some(o) => (week >= o) as u8 as f64,
            None if self.weeks() > 1 => week as f64 / (self.weeks() - 1) as f64,
            None => 0.0,
        };
        match entry.trend {
            Trend::Increase => powf(entry.rate, progress),
            Trend::Decrease => powf(entry.rate, -progress),
            Trend::Flatline => 1.0,
        }
    }

    /// Per-topic (word, weight) lists for one week.
    pub fn topic_weights(&self, week: usize) -> Vec<Vec<(String, f64)>> {
        let mut out: Vec<Vec<(String, f64)>> = self
            .topics
            .iter()
            .map(|t| t.iter().map(|w| (w.clone(), 1.0)).collect())
            .collect();
        for f in &self.frequency {
            let m = self.frequency_multiplier(f, week);
            for topic in &mut out {
                for (w, weight) in topic.iter_mut() {
                    if *w == f.word {
                        *weight *= m;
                    }
                }
            }
        }
        for s in &self.shifts {
            let p = Self::shift_progress(s, week);
            let base = out[s.source]
                .iter()
                .find(|(w, _)| *w == s.word)
                .map_or(1.0, |(_, weight)| *weight);
            for (w, weight) in out[s.source].iter_mut() {
                if *w == s.word {
                    *weight = base * (1.0 - p);
                }
            }
            if p > 0.0 {
                out[s.target].push((s.word.clone(), base * p));
            }
        }
        out
    }
}

/// One generated post, ready to be written as a JSONL line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub id: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftLabel {
    pub word: String,
    pub source: usize,
    pub target: usize,
    pub switch_week: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendLabel {
    pub word: String,
    pub trend: Trend,
    pub rate: f64,
    pub onset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub shifts: Vec<ShiftLabel>,
    pub trends: Vec<TrendLabel>,
}

impl GroundTruth {
    pub fn is_shifted(&self, word: &str) -> bool {
        self.shifts.iter().any(|s| s.word == word)
    }
}

pub fn ground_truth(spec: &SynthSpec) -> GroundTruth {
    GroundTruth {
        shifts: spec
            .shifts
            .iter()
            .map(|s| ShiftLabel {
                word: s.word.clone(),
                source: s.source,
                target: s.target,
                switch_week: s.switch_week,
            })
            .collect(),
        trends: spec
            .frequency
            .iter()
            .map(|f| TrendLabel {
                word: f.word.clone(),
                trend: f.trend,
                rate: f.rate,
                onset: f.onset,
            })
            .collect(),
    }
}

/// Independent RNG stream for one week.
pub fn week_rng(seed: u64, week: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(week as u64 + 1);
    rng
}

/// Posts of a single week. Weeks are independent, so callers may generate
/// them in parallel.
pub fn generate_week(spec: &SynthSpec, week: usize) -> Vec<SynthRecord> {
    let weights = spec.topic_weights(week);
    let cdfs: Vec<(Vec<&str>, Vec<f64>)> = weights
        .iter()
        .map(|topic| {
            let mut acc = 0.0;
            let words = topic.iter().map(|(w, _)| w.as_str()).collect();
            let cdf = topic
                .iter()
                .map(|(_, x)| {
                    acc += x;
                    acc
                })
                .collect();
            (words, cdf)
        })
        .collect();
    let mut rng = week_rng(spec.seed, week);
    let start = spec.week_origin + week as i64 * WeekClock::WEEK_SECONDS;
    let n = spec.posts_per_week[week];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let topic = rng.gen_range(0..cdfs.len());
        let (words, cdf) = &cdfs[topic];
        let total = *cdf.last().unwrap_or(&0.0);
        let mut text = String::new();
        for j in 0..spec.tokens_per_post {
            let u = rng.gen::<f64>() * total;
            let k = cdf.partition_point(|&c| c <= u).min(words.len() - 1);
            if j > 0 {
                text.push(' ');
            }
            text.push_str(words[k]);
        }
        let offset = rng.gen_range(0..WeekClock::WEEK_SECONDS);
        out.push(SynthRecord {
            id: format!("w{week:03}p{i:06}"),
            timestamp: start + offset,
            text,
            region: if spec.regions.is_empty() {
                None
            } else {
                Some(spec.regions[i % spec.regions.len()].clone())
            },
        });
    }
    out
}

/// All posts, week by week, with the planted labels.
pub fn generate_corpus(spec: &SynthSpec) -> Result<(Vec<SynthRecord>, GroundTruth)> {
    spec.validate()?;
    let mut posts = Vec::with_capacity(spec.posts_per_week.iter().sum());
    for week in 0..spec.weeks() {
        posts.extend(generate_week(spec, week));
    }
    Ok((posts, ground_truth(spec)))
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    sqrt(-2.0 * ln(u1)) * cos(2.0 * core::f64::consts::PI * u2)
}

/// Difference-series rows with autocorrelated shift: each word has its own
/// mean in `[0.05, 0.35]` and `x_t = mu + phi (x_{t-1} - mu) + sigma e_t`.
/// Drift tracks the shift with extra noise. Values are clamped to `[0, 2]`.
pub fn autocorrelated_rows(n_words: usize, len: usize, phi: f64, sigma: f64, seed: u64) -> Vec<SeriesRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_words)
        .map(|id| {
            let mu = 0.05 + 0.3 * rng.gen::<f64>();
            let stationary = sigma / sqrt((1.0 - phi * phi).max(1e-12));
            let mut x = mu + stationary * standard_normal(&mut rng);
            let mut d_e = Vec::with_capacity(len);
            let mut d_chi = Vec::with_capacity(len);
            for _ in 0..len {
                x = mu + phi * (x - mu) + sigma * standard_normal(&mut rng);
                d_e.push(x.clamp(0.0, 2.0));
                d_chi.push((x - mu) + sigma * standard_normal(&mut rng));
            }
            SeriesRow {
                id,
                d_e,
                d_chi,
                tau_f: vec![1.0; len + 1],
            }
        })
        .collect()
}

/// Rows whose shift values are i.i.d. draws shared across all words, so no
/// feature carries information about the target.
pub fn iid_rows(n_words: usize, len: usize, seed: u64) -> Vec<SeriesRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_words)
        .map(|id| {
            let d_e = (0..len).map(|_| (0.2 + 0.05 * standard_normal(&mut rng)).clamp(0.0, 2.0)).collect();
            let d_chi = (0..len).map(|_| 0.05 * standard_normal(&mut rng)).collect();
            SeriesRow {
                id,
                d_e,
                d_chi,
                tau_f: vec![1.0; len + 1],
            }
        })
        .collect()
}

/// Series from three families (rising, falling, flat) with additive noise;
/// returns `(id, series, family)` with families interleaved by id.
pub fn trend_family_series(per_family: usize, len: usize, noise: f64, seed: u64) -> Vec<(usize, Vec<f64>, Trend)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families = [Trend::Increase, Trend::Decrease, Trend::Flatline];
    (0..3 * per_family)
        .map(|id| {
            let fam = families[id % 3];
            let slope = 0.8 + 0.4 * rng.gen::<f64>();
            let series = (0..len)
                .map(|t| {
                    let s = t as f64 / (len.max(2) - 1) as f64;
                    let base = match fam {
                        Trend::Increase => slope * s,
                        Trend::Decrease => -slope * s,
                        Trend::Flatline => 0.0,
                    };
                    base + noise * standard_normal(&mut rng)
                })
                .collect();
            (id, series, fam)
        })
        .collect()
}
