#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use mdss_app::http::router;
use mdss_app::{ModelLibrary, SessionStore};
use tower::ServiceExt;

pub fn store() -> Arc<SessionStore> {
    Arc::new(SessionStore::new(ModelLibrary::default()))
}

/// One request against a fresh router over `store`; returns status and raw body.
pub async fn call(store: &Arc<SessionStore>, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(store.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

/// Runs the CLI in-process; returns exit code, stdout, stderr.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mdss").chain(args.iter().copied());
    let code = mdss_app::cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
