mod common;

use axum::http::Method;
use common::{call, cli, json, store};
use mdss_app::{machine, ModelLibrary};
use mdss_models::catalog::ModelRequest;
use mdss_models::{EvidenceInput, StopOverride};

#[tokio::test]
async fn infer_matches_session_marginals() {
    let (code, out, err) = cli(&["infer", "-m", "aa", "-e", "EntryBarriers=Yes", "-e", "GeoSize~1,2,1", "--json"]);
    assert_eq!(code, 0, "{err}");

    let mut s = ModelLibrary::default().session(&ModelRequest::bundled("aa")).unwrap();
    s.set_evidence(&EvidenceInput::hard("EntryBarriers", "Yes")).unwrap();
    s.set_evidence(&EvidenceInput::likelihood("GeoSize", vec![1.0, 2.0, 1.0])).unwrap();
    assert_eq!(out, machine(&s.marginals(&[]).unwrap()));

    let st = store();
    let (_, body) = call(&st, Method::POST, "/sessions", Some(r#"{"model":"aa"}"#)).await;
    let id = json(&body)["id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/evidence");
    call(&st, Method::POST, &uri, Some(r#"{"node":"EntryBarriers","value":"Yes"}"#)).await;
    call(&st, Method::POST, &uri, Some(r#"{"node":"GeoSize","kind":"likelihood","weights":[1,2,1]}"#)).await;
    let (_, http) = call(&st, Method::GET, &format!("/sessions/{id}/marginals"), None).await;
    assert_eq!(http, out);
}

#[tokio::test]
async fn decide_matches_session_decision() {
    let (code, out, err) = cli(&["decide", "-m", "global", "--tft", "--payoff", "imperfect", "--stop-prob", "0.5790", "--json"]);
    assert_eq!(code, 0, "{err}");

    let req: ModelRequest = serde_json::from_str(r#"{"model":"global","strategy":"tft","payoff":"imperfect"}"#).unwrap();
    let mut s = ModelLibrary::default().session(&req).unwrap();
    s.override_stop(Some(StopOverride::new(0.5790))).unwrap();
    assert_eq!(out, machine(&s.decision().unwrap()));

    let st = store();
    let (_, body) = call(&st, Method::POST, "/sessions", Some(&serde_json::to_string(&req).unwrap())).await;
    let id = json(&body)["id"].as_str().unwrap().to_string();
    call(&st, Method::POST, &format!("/sessions/{id}/override-stop"), Some(r#"{"p":0.5790}"#)).await;
    let (_, http) = call(&st, Method::GET, &format!("/sessions/{id}/decision"), None).await;
    assert_eq!(http, out);
}

#[test]
fn model_catalog_is_shared() {
    let (_, out, _) = cli(&["models", "--json"]);
    assert_eq!(out, machine(&ModelLibrary::default().models()));
}
