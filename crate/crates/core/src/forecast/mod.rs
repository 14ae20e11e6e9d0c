//! Forecasting the final representation-shift value of each word from the
//! history of its shift and/or drift series.

pub mod lstm;
pub mod metrics;
pub mod trees;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ShiftSeries;
use crate::usage::UsageSeries;
use crate::{Error, Result};

pub use lstm::{LstmNet, LstmParams, LstmRegressor};
pub use metrics::{mape, pearson, relative_error, rmse, Mape};
pub use trees::{BoostParams, BoostedTrees, RegressionTree};

/// Which series feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskSource {
    /// Past representation shift predicts future shift.
    Shift,
    /// Past tf-idf drift predicts future shift.
    Drift,
    /// Drift and shift histories concatenated.
    Combined,
}

impl TaskSource {
    pub const ALL: [TaskSource; 3] = [TaskSource::Shift, TaskSource::Drift, TaskSource::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskSource::Shift => "shift",
            TaskSource::Drift => "drift",
            TaskSource::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastTask {
    pub source: TaskSource,
    /// Weeks between the end of the feature window and the target.
    pub horizon: usize,
}

/// Everything the dataset builder needs about one word.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub id: usize,
    pub d_e: Vec<f64>,
    pub d_chi: Vec<f64>,
    /// Raw frequency series (length T); empty for words without usage stats.
    pub tau_f: Vec<f64>,
}

/// Joins shift and usage series into dataset rows.
pub fn rows_from(shift: &ShiftSeries, usage: &UsageSeries) -> Vec<SeriesRow> {
    shift
        .words
        .iter()
        .map(|w| SeriesRow {
            id: w.id,
            d_e: w.d_e.clone(),
            d_chi: w.d_chi.clone(),
            tau_f: usage.get(w.id).map(|u| u.tau_f.clone()).unwrap_or_default(),
        })
        .collect()
}

/// True when the word's frequency is nonzero in at least half of the weeks.
pub fn passes_sparsity_filter(tau_f: &[f64]) -> bool {
    if tau_f.is_empty() {
        return false;
    }
    let nonzero = tau_f.iter().filter(|&&v| v != 0.0).count();
    2 * nonzero >= tau_f.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDataset {
    pub task: ForecastTask,
    pub ids: Vec<usize>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub folds: Vec<usize>,
    pub k: usize,
    /// Words dropped by the sparsity filter.
    pub excluded: usize,
}

impl ForecastDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Truncates each word's series to the window ending `horizon` steps before
/// the final shift value, which becomes the target.
pub fn build_dataset(rows: &[SeriesRow], task: ForecastTask, k: usize, seed: u64) -> Result<ForecastDataset> {
    if task.horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    if k < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    let mut ids = Vec::new();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut excluded = 0;
    for row in rows {
        let len = row.d_e.len();
        if len < task.horizon + 2 {
            return Err(Error::SeriesTooShort {
                needed: task.horizon + 2,
                got: len,
            });
        }
        if !passes_sparsity_filter(&row.tau_f) {
            excluded += 1;
            continue;
        }
        let cut = len - task.horizon;
        let feat = match task.source {
            TaskSource::Shift => row.d_e[..cut].to_vec(),
            TaskSource::Drift => row.d_chi[..cut].to_vec(),
            TaskSource::Combined => {
                let mut f = row.d_chi[..cut].to_vec();
                f.extend_from_slice(&row.d_e[..cut]);
                f
            }
        };
        ids.push(row.id);
        features.push(feat);
        targets.push(row.d_e[len - 1]);
    }
    let needed = k.max(4);
    if ids.len() < needed {
        return Err(Error::NotEnoughWords { needed, got: ids.len() });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; ids.len()];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(ForecastDataset {
        task,
        ids,
        features,
        targets,
        folds,
        k,
        excluded,
    })
}

/// Predicts the last value of the feature window.
pub fn persistence_predict(features: &[Vec<f64>]) -> Vec<f64> {
    features.iter().map(|f| f.last().copied().unwrap_or(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Baseline,
    Adaboost,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Baseline, ModelKind::Adaboost, ModelKind::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Adaboost => "adaboost",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Persistence,
    BoostedTrees(BoostParams),
    Lstm(LstmParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Persistence => ModelKind::Baseline,
            ModelSpec::BoostedTrees(_) => ModelKind::Adaboost,
            ModelSpec::Lstm(_) => ModelKind::Lstm,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Baseline => ModelSpec::Persistence,
            ModelKind::Adaboost => ModelSpec::BoostedTrees(BoostParams::default()),
            ModelKind::Lstm => ModelSpec::Lstm(LstmParams::default()),
        }
    }
}

/// A model after fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Persistence,
    BoostedTrees(BoostedTrees),
    Lstm(LstmRegressor),
}

impl FittedModel {
    pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Persistence => FittedModel::Persistence,
            ModelSpec::BoostedTrees(p) => FittedModel::BoostedTrees(BoostedTrees::fit(x, y, p)?),
            ModelSpec::Lstm(p) => FittedModel::Lstm(LstmRegressor::fit(x, y, p)?),
        })
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        match self {
            FittedModel::Persistence => features.last().copied().unwrap_or(0.0),
            FittedModel::BoostedTrees(m) => m.predict(features),
            FittedModel::Lstm(m) => m.predict(features),
        }
    }
}

/// Metrics over a set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    /// `None` when either side has zero variance.
    pub pearson: Option<f64>,
    pub rmse: f64,
    pub mape: Mape,
}

impl Metrics {
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Self {
            n: y.len(),
            pearson: pearson(y, yhat).ok(),
            rmse: rmse(y, yhat)?,
            mape: mape(y, yhat)?,
        })
    }

    /// RMSE scaled by 100 for display in "x 10^-2" columns.
    pub fn rmse_display(&self) -> f64 {
        self.rmse * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPrediction {
    pub id: usize,
    pub fold: usize,
    pub y: f64,
    pub yhat: f64,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub model: ModelKind,
    pub task: ForecastTask,
    pub pooled: Metrics,
    pub folds: Vec<Metrics>,
    pub predictions: Vec<WordPrediction>,
    /// Subset of `predictions` for requested keywords, in request order.
    pub keywords: Vec<WordPrediction>,
    pub excluded: usize,
}

impl ForecastReport {
    pub fn prediction(&self, id: usize) -> Option<&WordPrediction> {
        self.predictions.iter().find(|p| p.id == id)
    }
}

/// k-fold cross-validation: fit on k-1 folds, predict the held-out fold.
pub fn cross_validate(dataset: &ForecastDataset, spec: &ModelSpec, keywords: &[usize]) -> Result<ForecastReport> {
    let mut predictions: Vec<WordPrediction> = Vec::with_capacity(dataset.len());
    let mut folds = Vec::with_capacity(dataset.k);
    for fold in 0..dataset.k {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..dataset.len()).partition(|&i| dataset.folds[i] != fold);
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| dataset.features[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| dataset.targets[i]).collect();
        let model = FittedModel::fit(spec, &tx, &ty).map_err(|e| Error::Fold {
            fold,
            source: alloc::boxed::Box::new(e),
        })?;
        let mut fy = Vec::with_capacity(test.len());
        let mut fp = Vec::with_capacity(test.len());
        for &i in &test {
            let y = dataset.targets[i];
            let yhat = model.predict(&dataset.features[i]);
            fy.push(y);
            fp.push(yhat);
            predictions.push(WordPrediction {
                id: dataset.ids[i],
                fold,
                y,
                yhat,
                rel_error: relative_error(y, yhat),
            });
        }
        folds.push(Metrics::compute(&fy, &fp).map_err(|e| Error::Fold {
            fold,
            source: alloc::boxed::Box::new(e),
        })?);
    }
    predictions.sort_by_key(|p| p.id);
    let y: Vec<f64> = predictions.iter().map(|p| p.y).collect();
    let yhat: Vec<f64> = predictions.iter().map(|p| p.yhat).collect();
    let pooled = Metrics::compute(&y, &yhat)?;
    let keywords = keywords
        .iter()
        .filter_map(|k| predictions.iter().find(|p| p.id == *k).cloned())
        .collect();
    Ok(ForecastReport {
        model: spec.kind(),
        task: dataset.task,
        pooled,
        folds,
        predictions,
        keywords,
        excluded: dataset.excluded,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => String::from("n/a"),
    }
}

/// Text table with one row per report: Pearson, RMSE x10^-2 and MAPE.
pub fn render_reports(reports: &[ForecastReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<9} {:<9} {:>3}  {:>8}  {:>14}  {:>10}",
        "task", "model", "n", "pearson", "rmse(x10^-2)", "mape"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<9} {:<9} {:>3}  {:>8}  {:>14.3}  {:>10.2}",
            r.task.source.as_str(),
            r.model.as_str(),
            r.task.horizon,
            fmt_opt(r.pooled.pearson),
            r.pooled.rmse_display(),
            r.pooled.mape.value
        );
    }
    s
}

/// Relative-error table for keywords; `label` maps ids to words.
pub fn render_keyword_errors<F: Fn(usize) -> String>(report: &ForecastReport, label: F) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>10} {:>10} {:>10}", "word", "y", "yhat", "rel_err");
    for p in &report.keywords {
        let _ = writeln!(s, "{:<20} {:>10.4} {:>10.4} {:>10}", label(p.id), p.y, p.yhat, fmt_opt(p.rel_error));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, len: usize, tau_f: Vec<f64>) -> SeriesRow {
        SeriesRow {
            id,
            d_e: (0..len).map(|i| (id * 100 + i) as f64).collect(),
            d_chi: (0..len).map(|i| -((id * 100 + i) as f64)).collect(),
            tau_f,
        }
    }

    #[test]
    fn sparsity_filter() {
        let mut t = vec![0.0; 10];
        t[..4].fill(1.0); // zeros in 60% of weeks
        assert!(!passes_sparsity_filter(&t));
        t[4] = 1.0; // exactly half nonzero
        assert!(passes_sparsity_filter(&t));
        assert!(!passes_sparsity_filter(&[]));
    }

    #[test]
    fn feature_lengths() {
        let rows: Vec<SeriesRow> = (0..6).map(|i| row(i, 24, vec![1.0; 25])).collect();
        let shift = build_dataset(&rows, ForecastTask { source: TaskSource::Shift, horizon: 1 }, 4, 0).unwrap();
        assert_eq!(shift.features[0].len(), 23);
        assert_eq!(shift.targets[0], 23.0);
        assert_eq!(*shift.features[0].last().unwrap(), 22.0);
        let comb = build_dataset(&rows, ForecastTask { source: TaskSource::Combined, horizon: 1 }, 4, 0).unwrap();
        assert_eq!(comb.features[0].len(), 46);
        let h3 = build_dataset(&rows, ForecastTask { source: TaskSource::Shift, horizon: 3 }, 4, 0).unwrap();
        assert_eq!(h3.features[0].len(), 21);
        assert_eq!(h3.targets[0], 23.0);
    }

    #[test]
    fn fold_sizes_103() {
        let rows: Vec<SeriesRow> = (0..103).map(|i| row(i, 6, vec![1.0; 7])).collect();
        let d = build_dataset(&rows, ForecastTask { source: TaskSource::Shift, horizon: 1 }, 4, 9).unwrap();
        assert_eq!(d.fold_sizes(), vec![26, 26, 26, 25]);
    }

    #[test]
    fn too_few_words_or_short_series() {
        let rows: Vec<SeriesRow> = (0..3).map(|i| row(i, 6, vec![1.0; 7])).collect();
        let t = ForecastTask { source: TaskSource::Shift, horizon: 1 };
        assert!(matches!(build_dataset(&rows, t, 4, 0), Err(Error::NotEnoughWords { .. })));
        let short: Vec<SeriesRow> = (0..8).map(|i| row(i, 3, vec![1.0; 4])).collect();
        let t3 = ForecastTask { source: TaskSource::Shift, horizon: 3 };
        assert!(matches!(build_dataset(&short, t3, 4, 0), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn persistence_is_last_value() {
        assert_eq!(persistence_predict(&[vec![0.3, 0.1, 0.07]]), vec![0.07]);
    }

    #[test]
    fn persistence_constant_series_is_exact() {
        let rows: Vec<SeriesRow> = (0..8)
            .map(|i| SeriesRow {
                id: i,
                d_e: vec![0.1 * i as f64; 6],
                d_chi: vec![0.0; 6],
                tau_f: vec![1.0; 7],
            })
            .collect();
        let d = build_dataset(&rows, ForecastTask { source: TaskSource::Shift, horizon: 2 }, 4, 1).unwrap();
        let r = cross_validate(&d, &ModelSpec::Persistence, &[3]).unwrap();
        assert_eq!(r.pooled.rmse, 0.0);
        assert_eq!(r.keywords.len(), 1);
        assert_eq!(r.keywords[0].id, 3);
    }

    #[test]
    fn names_round_trip() {
        for t in TaskSource::ALL {
            assert_eq!(TaskSource::parse(t.as_str()), Some(t));
        }
        for m in ModelKind::ALL {
            assert_eq!(ModelKind::parse(m.as_str()), Some(m));
        }
    }
}
