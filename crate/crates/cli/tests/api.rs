mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qexplain_cli::{open_service, router};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

fn app(dir: &tempfile::TempDir) -> Router {
    router(open_service(dir.path()).unwrap())
}

#[tokio::test]
async fn table_and_questions() {
    let dir = common::data_dir();
    let app = app(&dir);
    let (s, v) = call(&app, "GET", "/tables/olympics", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["headers"], json!(["Year", "Country", "City"]));
    assert_eq!(v["rows"][5][2], "Rio de Janeiro");
    assert_eq!(call(&app, "GET", "/tables/nope", None).await.0, StatusCode::NOT_FOUND);
    let (_, qs) = call(&app, "GET", "/questions", None).await;
    assert_eq!(qs.as_array().unwrap().len(), 2);
    assert_eq!(qs[1]["candidates"], 7);
}

#[tokio::test]
async fn explanations_carry_the_annotation_document() {
    let dir = common::data_dir();
    let app = app(&dir);
    let (s, v) = call(&app, "GET", "/questions/usl/explanations?k=7", None).await;
    assert_eq!(s, StatusCode::OK);
    let cards = v.as_array().unwrap();
    assert_eq!(cards.len(), 2);
    assert!(cards[0]["utterance"]
        .as_str()
        .unwrap()
        .starts_with("maximum of values in column Year"));
    assert!(cards[1]["utterance"]
        .as_str()
        .unwrap()
        .starts_with("minimum of values in column Year"));
    let doc = &cards[0]["highlight"];
    assert_eq!(doc["table_id"], "usl");
    assert_eq!(doc["header_marks"], json!([{"fn": "max", "column": "Year"}]));
    let styles: Vec<&str> = doc["styles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["style"].as_str().unwrap())
        .collect();
    for style in ["colored", "framed", "lit"] {
        assert!(styles.contains(&style), "{style}");
    }
    assert_eq!(cards[0]["result"]["value"]["value"], json!({"number": 2004.0}));
    assert!(cards[0]["sql"].as_str().unwrap().starts_with("SELECT MAX"));

    let (_, seven) = call(&app, "GET", "/questions/greece/explanations", None).await;
    let seven = seven.as_array().unwrap();
    assert_eq!(seven.len(), 7);
    let positions: Vec<u64> = seven.iter().map(|c| c["position"].as_u64().unwrap()).collect();
    assert_eq!(positions, (0..7).collect::<Vec<_>>());
    // Summing text is reported inline.
    assert!(seven[6]["error"].is_string() && seven[6]["highlight"].is_null());
    let (_, three) = call(&app, "GET", "/questions/greece/explanations?k=3", None).await;
    assert_eq!(three.as_array().unwrap().len(), 3);

    let (s, e) = call(&app, "GET", "/questions/zzz/explanations", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(e["error"].as_str().unwrap().contains("zzz"));
}

#[tokio::test]
async fn feedback_is_validated_and_stored() {
    let dir = common::data_dir();
    let app = app(&dir);
    let fb =
        |w: &str, sel: Value| json!({"question_id": "greece", "worker_id": w, "selection": sel, "elapsed_ms": 1500});
    let (s, rec) = call(&app, "POST", "/feedback", Some(fb("w1", json!(3)))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(rec["selection"], 3);
    assert_eq!(rec["elapsed_ms"], 1500);
    let (s, rec) = call(&app, "POST", "/feedback", Some(fb("w2", Value::Null))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert!(rec["selection"].is_null());
    let (s, _) = call(&app, "POST", "/feedback", Some(fb("w3", json!(9)))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let unknown = json!({"question_id": "zzz", "worker_id": "w", "selection": 0});
    assert_eq!(
        call(&app, "POST", "/feedback", Some(unknown)).await.0,
        StatusCode::NOT_FOUND
    );
    let malformed = json!({"question_id": "greece"});
    assert!(call(&app, "POST", "/feedback", Some(malformed))
        .await
        .0
        .is_client_error());

    let log = std::fs::read_to_string(dir.path().join("annotations.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
}

#[tokio::test]
async fn train_then_metrics() {
    let dir = common::data_dir();
    let app = app(&dir);
    let (s, m0) = call(&app, "GET", "/metrics", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(m0["examples"], 2);
    for w in ["w1", "w2"] {
        let fb = json!({"question_id": "greece", "worker_id": w, "selection": 0});
        call(&app, "POST", "/feedback", Some(fb)).await;
    }
    let (s, t) = call(
        &app,
        "POST",
        "/train",
        Some(json!({"epochs": 4, "lr": 0.1, "lambda": 0.0})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{t}");
    assert_eq!(t["objectives"].as_array().unwrap().len(), 4);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(saved["version"], 1);
    assert_eq!(saved["dimension"], t["dimension"]);
    let (_, m1) = call(&app, "GET", "/metrics", None).await;
    assert!(m1["mrr"].as_f64().unwrap() >= 0.0 && m1["mrr"].as_f64().unwrap() <= 1.0);
    let (s, _) = call(&app, "POST", "/train", Some(json!({"epochs": "many"}))).await;
    assert!(s.is_client_error());
}
