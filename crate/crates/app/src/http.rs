//! HTTP+JSON API over a [`SessionStore`].

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::Router;
use mdss_models::catalog::ModelRequest;
use mdss_models::fixtures::{fixture_names, fixture_source};
use mdss_models::scenario::{RetractArgs, Step};
use mdss_models::session::Stages;
use mdss_models::{run_scenario, table6_sweep, EvidenceInput, ScenarioDoc, StopOverride};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::library::machine;
use crate::store::SessionStore;
use crate::sweep_args::SweepRequest;

type Shared = Arc<SessionStore>;

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], machine(value)).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::BAD_REQUEST);
        json_response(status, &self)
    }
}

fn ok<T: Serialize>(r: ApiResult<T>) -> Response {
    match r {
        Ok(v) => json_response(StatusCode::OK, &v),
        Err(e) => e.into_response(),
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(e.to_string()))
}

/// Runs CPU-bound engine work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::new("internal", e.to_string())))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Catalog {
    models: Vec<mdss_models::ModelInfo>,
    scenarios: Vec<&'static str>,
}

async fn health() -> Response {
    json_response(StatusCode::OK, &serde_json::json!({ "status": "ok" }))
}

async fn models(State(store): State<Shared>) -> Response {
    json_response(
        StatusCode::OK,
        &Catalog {
            models: store.library().models(),
            scenarios: fixture_names(),
        },
    )
}

async fn scenario_fixture(Path(name): Path<String>) -> Response {
    match fixture_source(&name) {
        Some(src) => ok(ScenarioDoc::parse(src).map_err(ApiError::from)),
        None => ApiError::new("not-found", format!("no bundled scenario `{name}`")).into_response(),
    }
}

async fn create_session(State(store): State<Shared>, body: Bytes) -> Response {
    let r = async {
        let req: ModelRequest = parse_body(&body)?;
        blocking(move || store.create(req)).await
    }
    .await;
    match r {
        Ok(v) => json_response(StatusCode::CREATED, &v),
        Err(e) => e.into_response(),
    }
}

async fn get_session(State(store): State<Shared>, Path(id): Path<String>) -> Response {
    ok(store.with_session(&id, |e| Ok(e.view())))
}

async fn set_evidence(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    let r = async {
        let input: EvidenceInput = parse_body(&body)?;
        blocking(move || store.apply(&id, Step::Set(input))).await
    }
    .await;
    ok(r)
}

fn stages_param(q: &HashMap<String, String>) -> ApiResult<Option<Stages>> {
    match q.get("stages").map(String::as_str) {
        None | Some("") => Ok(None),
        Some("all") => Ok(Some(Stages::Keyword("all".into()))),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map(|v| Some(Stages::List(v)))
            .map_err(|_| ApiError::malformed(format!("bad stage list `{list}`"))),
    }
}

async fn retract_evidence(
    State(store): State<Shared>,
    Path((id, node)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    let r = async {
        let stages = stages_param(&q)?;
        blocking(move || store.apply(&id, Step::Retract(RetractArgs { node, stages }))).await
    }
    .await;
    ok(r)
}

/// `{"p": null}` restores the AA network.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct OverrideBody {
    p: Option<f64>,
    #[serde(default)]
    later_stages: Option<f64>,
}

async fn override_stop(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    let r = async {
        let b: OverrideBody = parse_body(&body)?;
        let step = match b.p {
            Some(p) => Step::OverrideStop(StopOverride {
                p,
                later_stages: b.later_stages,
            }),
            None => Step::RestoreStop,
        };
        blocking(move || store.apply(&id, step)).await
    }
    .await;
    ok(r)
}

async fn marginals(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    let nodes: Vec<String> = q
        .get("nodes")
        .map(|s| s.split(',').map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect())
        .unwrap_or_default();
    ok(blocking(move || store.with_session(&id, |e| e.session.marginals(&nodes).map_err(|err| e.error(err)))).await)
}

async fn decision(State(store): State<Shared>, Path(id): Path<String>) -> Response {
    ok(blocking(move || store.with_session(&id, |e| e.session.decision().map_err(|err| e.error(err)))).await)
}

async fn scenarios_run(body: Bytes) -> Response {
    let r = async {
        let doc: ScenarioDoc = parse_body(&body)?;
        blocking(move || run_scenario(&doc).map_err(ApiError::from)).await
    }
    .await;
    ok(r)
}

async fn sweep_table6(body: Bytes) -> Response {
    let r = async {
        let req: SweepRequest = if body.iter().all(u8::is_ascii_whitespace) {
            SweepRequest::default()
        } else {
            parse_body(&body)?
        };
        blocking(move || table6_sweep(&req.config()).map_err(ApiError::from)).await
    }
    .await;
    ok(r)
}

async fn fallback() -> Response {
    ApiError::new("not-found", "no such endpoint").into_response()
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/models", get(models))
        .route("/scenarios/run", post(scenarios_run))
        .route("/scenarios/{name}", get(scenario_fixture))
        .route("/sweeps/table6", post(sweep_table6))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/evidence", post(set_evidence))
        .route("/sessions/{id}/evidence/{node}", delete(retract_evidence))
        .route("/sessions/{id}/override-stop", post(override_stop))
        .route("/sessions/{id}/marginals", get(marginals))
        .route("/sessions/{id}/decision", get(decision))
        .fallback(fallback)
        .with_state(store)
}

pub async fn serve(store: Arc<SessionStore>, addr: &str) -> ApiResult<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ApiError::new("bind-failed", format!("{addr}: {e}")))?;
    let local = listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| addr.to_string());
    eprintln!("listening on http://{local}");
    axum::serve(listener, router(store))
        .await
        .map_err(|e| ApiError::new("internal", e.to_string()))
}
