use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use chaos_core::models::catalog;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::request::{deserialize_box, prepare, to_search_box, AxisBounds, JobKind, JobRequest};
use crate::runner::Runner;
use crate::store::{Job, JobStore};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<JobStore>,
    pub runner: Runner,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/systems", get(systems))
        .route("/api/jobs", post(create_job).get(list_jobs))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/jobs/{id}/samples", get(samples))
        .route("/api/jobs/{id}/refine", post(refine))
        .route("/api/jobs/{id}/results.csv", get(results_csv))
        .with_state(state)
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("bad request body: {e}")))
}

async fn systems() -> impl IntoResponse {
    Json(catalog())
}

pub fn submit(state: &AppState, req: JobRequest, parent_id: Option<String>) -> Result<Job, ApiError> {
    let prep = prepare(&req)?;
    let job = state.store.create(req, prep.total, parent_id)?;
    state.runner.submit(job.id.clone());
    Ok(job)
}

async fn create_job(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: JobRequest = parse_body(&body)?;
    let job = submit(&state, req, None)?;
    Ok(Json(json!({"id": job.id})))
}

async fn list_jobs(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.store.list())
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Job>, ApiError> {
    Ok(Json(state.store.get(&id)?))
}

/// `name:lo:hi`, inclusive.
fn parse_axis(spec: &str) -> Result<(String, f64, f64), ApiError> {
    let mut parts = spec.rsplitn(3, ':');
    let (hi, lo, name) = (parts.next(), parts.next(), parts.next());
    let bad = || ApiError::validation(format!("axis filter `{spec}` is not name:lo:hi"));
    let (Some(hi), Some(lo), Some(name)) = (hi, lo, name) else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((name.to_owned(), lo, hi))
}

pub fn filter_rows(rows: Vec<Value>, axes: &[(String, f64, f64)]) -> Result<Vec<Value>, ApiError> {
    if let Some(first) = rows.first() {
        if let Some((name, _, _)) = axes.iter().find(|(n, _, _)| first.get(n).is_none()) {
            return Err(ApiError::validation(format!("unknown axis `{name}`")));
        }
    }
    Ok(rows
        .into_iter()
        .filter(|r| {
            axes.iter().all(|(n, lo, hi)| {
                r.get(n)
                    .and_then(Value::as_f64)
                    .is_some_and(|v| *lo <= v && v <= *hi)
            })
        })
        .collect())
}

async fn samples(
    State(state): State<AppState>,
    Path(id): Path<String>,
    RawQuery(query): RawQuery,
) -> Result<Json<Vec<Value>>, ApiError> {
    let axes = form_urlencoded::parse(query.unwrap_or_default().as_bytes())
        .filter(|(k, _)| k == "axis")
        .map(|(_, v)| parse_axis(&v))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = state.store.rows(&id)?;
    Ok(Json(filter_rows(rows, &axes)?))
}

#[derive(Deserialize)]
struct RefineBody {
    #[serde(rename = "box", deserialize_with = "deserialize_box")]
    search_box: Vec<AxisBounds>,
}

pub fn refine_job(state: &AppState, parent_id: &str, restricted: Vec<AxisBounds>) -> Result<Job, ApiError> {
    let parent = state.store.get(parent_id)?;
    if parent.kind != JobKind::SampleBatch {
        return Err(ApiError::validation("only sample_batch jobs can be refined"));
    }
    let outer = to_search_box(&parent.request.search_box)?;
    let inner = to_search_box(&restricted)?;
    if !inner.is_within(&outer) {
        return Err(ApiError::validation("restricted box is not inside the parent box"));
    }
    let mut req = parent.request.clone();
    req.search_box = restricted;
    submit(state, req, Some(parent.id))
}

async fn refine(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let body: RefineBody = parse_body(&body)?;
    let job = refine_job(&state, &id, body.search_box)?;
    Ok(Json(json!({"id": job.id})))
}

async fn results_csv(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let bytes = state.store.results_csv(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_specs() {
        assert_eq!(parse_axis("ic.x:0.1:0.5").unwrap(), ("ic.x".into(), 0.1, 0.5));
        assert_eq!(parse_axis("mle:-1e-3:2").unwrap(), ("mle".into(), -1e-3, 2.0));
        assert!(parse_axis("eps:1").is_err());
        assert!(parse_axis("eps:a:1").is_err());
    }

    #[test]
    fn filters() {
        let rows = vec![json!({"a": 0.1, "mle": null}), json!({"a": 0.6, "mle": 0.2})];
        assert_eq!(filter_rows(rows.clone(), &[]).unwrap().len(), 2);
        assert_eq!(filter_rows(rows.clone(), &[("a".into(), 0.0, 0.5)]).unwrap().len(), 1);
        assert_eq!(filter_rows(rows.clone(), &[("a".into(), 0.5, 0.4)]).unwrap().len(), 0);
        assert_eq!(filter_rows(rows.clone(), &[("mle".into(), -1.0, 1.0)]).unwrap().len(), 1);
        assert!(filter_rows(rows, &[("b".into(), 0.0, 1.0)]).is_err());
    }
}
