//! Read-only JSON API over a loaded bundle.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use driftscope_core::explore::{nearest_neighbors, project_trajectory, series_correlation, Metric, Trajectory2D};
use driftscope_core::forecast::{ModelKind, TaskSource};
use serde::Serialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::bundle::{Bundle, ForecastKey, Stat};

pub const DEFAULT_WORD_LIMIT: usize = 50;
const MAX_WORD_LIMIT: usize = 1000;
const MAX_K: usize = 100;
const DEFAULT_KEYWORDS: usize = 10;

#[derive(Debug)]
pub enum ApiError {
    UnknownWord,
    BadRequest(String),
    NotFound(&'static str),
    Internal(String),
}

static ERROR_SEQ: AtomicU64 = AtomicU64::new(1);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::UnknownWord => (StatusCode::NOT_FOUND, Json(json!({"error": "unknown_word"}))).into_response(),
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, Json(json!({"error": what}))).into_response(),
            ApiError::BadRequest(msg) => {
                (StatusCode::BAD_REQUEST, Json(json!({"error": "bad_request", "detail": msg}))).into_response()
            }
            ApiError::Internal(msg) => {
                let id = format!("e{:08x}", ERROR_SEQ.fetch_add(1, Ordering::Relaxed));
                log::error!("internal error {id}: {msg}");
                (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "internal", "id": id}))).into_response()
            }
        }
    }
}

type ApiResult = Result<Json<Value>, ApiError>;
type Params = Query<BTreeMap<String, String>>;

fn to_value<T: Serialize>(v: &T) -> ApiResult {
    serde_json::to_value(v).map(Json).map_err(|e| ApiError::Internal(e.to_string()))
}

fn parse_param<T: std::str::FromStr>(q: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::BadRequest(format!("invalid value for {key}: {s:?}"))),
    }
}

fn word_id(bundle: &Bundle, word: &str) -> Result<usize, ApiError> {
    bundle.word_id(word).ok_or(ApiError::UnknownWord)
}

pub fn router(bundle: Arc<Bundle>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/meta", get(meta))
        .route("/api/words", get(words))
        .route("/api/series/{word}", get(series))
        .route("/api/neighbors/{word}", get(neighbors))
        .route("/api/trajectory/{word}", get(trajectory))
        .route("/api/clusters", get(clusters))
        .route("/api/forecast/{word}", get(forecast))
        .route("/api/corr", get(corr))
        .with_state(bundle);
    match static_dir {
        Some(dir) if dir.is_dir() => api.fallback_service(ServeDir::new(dir)),
        _ => api,
    }
}

async fn meta(State(b): State<Arc<Bundle>>) -> ApiResult {
    let forecasts: Vec<&ForecastKey> = b.forecasts.keys().collect();
    let stats: Vec<&str> = b.clusters.keys().map(|s| s.as_str()).collect();
    Ok(Json(json!({
        "weeks": b.meta.weeks,
        "week_origin": b.meta.week_origin,
        "week_len_seconds": b.meta.week_len_seconds,
        "vocab_size": b.meta.vocab_size,
        "dim": b.meta.dim,
        "regions": b.meta.regions,
        "posts_per_week": b.meta.posts_per_week,
        "cluster_stats": stats,
        "forecasts": forecasts,
    })))
}

async fn words(State(b): State<Arc<Bundle>>, Query(q): Params) -> ApiResult {
    let limit: usize = parse_param(&q, "limit", DEFAULT_WORD_LIMIT)?;
    let offset: usize = parse_param(&q, "offset", 0)?;
    if limit > MAX_WORD_LIMIT {
        return Err(ApiError::BadRequest(format!("limit must be at most {MAX_WORD_LIMIT}")));
    }
    let prefix = q.get("prefix").map(String::as_str).unwrap_or("");
    let matching: Vec<Value> = b
        .vocab
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.word.starts_with(prefix))
        .map(|(id, e)| json!({"word": e.word, "id": id, "post_freq": e.post_freq, "stopword": e.stopword}))
        .collect();
    let total = matching.len();
    let page: Vec<Value> = matching.into_iter().skip(offset).take(limit).collect();
    Ok(Json(json!({"total": total, "offset": offset, "limit": limit, "words": page})))
}

async fn series(State(b): State<Arc<Bundle>>, Path(word): Path<String>) -> ApiResult {
    let id = word_id(&b, &word)?;
    let shift = b.shift.as_ref().ok_or(ApiError::NotFound("dynamics_not_computed"))?;
    let ws = &shift.words[id];
    let t = b.weeks();
    let (tau_f, tau_chi) = match b.usage.get(id) {
        Some(u) => (u.tau_f.clone(), u.tau_chi.clone()),
        None => (vec![0.0; t], vec![0.0; t]),
    };
    Ok(Json(json!({
        "word": word,
        "id": id,
        "usage_tracked": ws.usage_tracked,
        "tau_f": tau_f,
        "tau_chi": tau_chi,
        "d_f": ws.d_f,
        "d_chi": ws.d_chi,
        "d_e": ws.d_e,
        "cum": ws.cum,
        "zero_norm": ws.zero_norm,
    })))
}

fn parse_metric(q: &BTreeMap<String, String>) -> Result<Metric, ApiError> {
    match q.get("metric") {
        None => Ok(Metric::Cosine),
        Some(s) => Metric::parse(s).ok_or_else(|| ApiError::BadRequest(format!("unknown metric {s:?}"))),
    }
}

async fn neighbors(State(b): State<Arc<Bundle>>, Path(word): Path<String>, Query(q): Params) -> ApiResult {
    let id = word_id(&b, &word)?;
    let t: usize = parse_param(&q, "t", b.weeks() - 1)?;
    let k: usize = parse_param(&q, "k", 10)?;
    let metric = parse_metric(&q)?;
    if t >= b.weeks() {
        return Err(ApiError::BadRequest(format!("t must be below {}", b.weeks())));
    }
    if k > MAX_K || k >= b.vocab.len() {
        return Err(ApiError::BadRequest(format!("k must be below {}", MAX_K.min(b.vocab.len()))));
    }
    let found = nearest_neighbors(&b.embeddings, t, id, k, metric).map_err(|e| ApiError::Internal(e.to_string()))?;
    let list: Vec<Value> = found
        .iter()
        .map(|n| json!({"word": b.vocab.word(n.id), "id": n.id, "distance": n.distance}))
        .collect();
    Ok(Json(json!({"word": word, "t": t, "k": k, "metric": metric.as_str(), "neighbors": list})))
}

/// Trajectory JSON with neighbor labels resolved to words.
pub fn trajectory_json(b: &Bundle, word: &str, tr: &Trajectory2D) -> Value {
    let neighbors: Vec<Value> = tr
        .neighbors
        .iter()
        .map(|n| {
            let labels: Vec<&str> = n.ids.iter().map(|&id| b.vocab.word(id)).collect();
            json!({"t": n.t, "labels": labels, "points": n.points})
        })
        .collect();
    json!({
        "word": word,
        "points": tr.points,
        "neighbors": neighbors,
        "evr": tr.evr,
        "basis": tr.basis,
        "degenerate": tr.degenerate,
    })
}

async fn trajectory(State(b): State<Arc<Bundle>>, Path(word): Path<String>, Query(q): Params) -> ApiResult {
    let id = word_id(&b, &word)?;
    let k: usize = parse_param(&q, "k", 2)?;
    if k > MAX_K || k >= b.vocab.len() {
        return Err(ApiError::BadRequest(format!("k must be below {}", MAX_K.min(b.vocab.len()))));
    }
    let tr = project_trajectory(&b.embeddings, id, k).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(trajectory_json(&b, &word, &tr)))
}

async fn clusters(State(b): State<Arc<Bundle>>, Query(q): Params) -> ApiResult {
    let raw = q.get("stat").map(String::as_str).unwrap_or("e");
    let stat = Stat::parse(raw).ok_or_else(|| ApiError::BadRequest(format!("unknown stat {raw:?}")))?;
    let file = b.clusters.get(&stat).ok_or(ApiError::NotFound("clusters_not_computed"))?;
    to_value(file)
}

async fn forecast(State(b): State<Arc<Bundle>>, Path(word): Path<String>, Query(q): Params) -> ApiResult {
    let id = word_id(&b, &word)?;
    let task_raw = q.get("task").map(String::as_str).unwrap_or("shift");
    let model_raw = q.get("model").map(String::as_str).unwrap_or("lstm");
    let task = TaskSource::parse(task_raw).ok_or_else(|| ApiError::BadRequest(format!("unknown task {task_raw:?}")))?;
    let model = ModelKind::parse(model_raw).ok_or_else(|| ApiError::BadRequest(format!("unknown model {model_raw:?}")))?;
    let horizon: usize = parse_param(&q, "horizon", 1)?;
    if !(1..=3).contains(&horizon) {
        return Err(ApiError::BadRequest("horizon must be 1, 2 or 3".into()));
    }
    let key = ForecastKey { task, horizon, model };
    let report = b.forecasts.get(&key).ok_or(ApiError::NotFound("forecast_not_computed"))?;
    let pred = report.prediction(id).ok_or(ApiError::NotFound("word_not_forecast"))?;
    Ok(Json(json!({
        "word": word,
        "task": task.as_str(),
        "horizon": horizon,
        "model": model.as_str(),
        "y": pred.y,
        "yhat": pred.yhat,
        "rel_error": pred.rel_error,
        "fold": pred.fold,
        "pooled": report.pooled,
    })))
}

/// Default keywords: the most frequent non-stopwords.
pub fn default_keywords(b: &Bundle) -> Vec<String> {
    b.vocab
        .entries()
        .iter()
        .filter(|e| !e.stopword)
        .take(DEFAULT_KEYWORDS)
        .map(|e| e.word.clone())
        .collect()
}

fn chi_map(b: &Bundle, shift: &driftscope_core::dynamics::ShiftSeries, words: &[String]) -> BTreeMap<String, Vec<f64>> {
    words
        .iter()
        .filter_map(|w| b.vocab.id(w).map(|id| (w.clone(), shift.words[id].d_chi.clone())))
        .collect()
}

fn e_map(b: &Bundle, shift: &driftscope_core::dynamics::ShiftSeries, words: &[String]) -> BTreeMap<String, Vec<f64>> {
    words
        .iter()
        .filter_map(|w| b.vocab.id(w).map(|id| (w.clone(), shift.words[id].d_e.clone())))
        .collect()
}

async fn corr(State(b): State<Arc<Bundle>>, Query(q): Params) -> ApiResult {
    let keywords: Vec<String> = match q.get("keywords") {
        Some(s) => s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        None => default_keywords(&b),
    };
    if let Some(bad) = keywords.iter().find(|w| b.vocab.id(w).is_none()) {
        log::debug!("corr: unknown keyword {bad}");
        return Err(ApiError::UnknownWord);
    }
    let kind = q.get("kind").map(String::as_str).unwrap_or("cross_region");
    let matrix = match kind {
        "cross_region" => {
            let names: Vec<&String> = b.regions.keys().collect();
            if names.len() < 2 {
                return Err(ApiError::NotFound("regions_not_available"));
            }
            let (ra, rb) = (&b.regions[names[0]], &b.regions[names[1]]);
            let (Some(sa), Some(sb)) = (&ra.shift, &rb.shift) else {
                return Err(ApiError::NotFound("regions_not_available"));
            };
            let m = series_correlation(&chi_map(&b, sa, &keywords), &chi_map(&b, sb, &keywords), &keywords)
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            json!({"kind": kind, "a": names[0], "b": names[1], "matrix": m})
        }
        "usage_vs_shift" => {
            let (label, shift) = match q.get("region") {
                None => ("all", b.shift.as_ref().ok_or(ApiError::NotFound("dynamics_not_computed"))?),
                Some(r) => {
                    let data = b.regions.get(r).ok_or_else(|| ApiError::BadRequest(format!("unknown region {r:?}")))?;
                    (r.as_str(), data.shift.as_ref().ok_or(ApiError::NotFound("regions_not_available"))?)
                }
            };
            let m = series_correlation(&chi_map(&b, shift, &keywords), &e_map(&b, shift, &keywords), &keywords)
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            json!({"kind": kind, "region": label, "matrix": m})
        }
        other => return Err(ApiError::BadRequest(format!("unknown kind {other:?}"))),
    };
    Ok(Json(matrix))
}

/// Binds and serves until interrupted.
pub async fn serve(bundle: Arc<Bundle>, bind: &str, static_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let app = router(bundle, static_dir);
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await?;
    Ok(())
}
