use std::fmt::Write as _;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use corand_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(config: ServiceConfig) -> Router {
    router(AppState::new(config))
}

async fn send(app: &Router, method: Method, uri: &str, content_type: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", content_type)
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, Method::GET, uri, "application/json", Body::empty()).await
}

async fn json_call(app: &Router, method: Method, uri: &str, body: Value) -> (StatusCode, Value) {
    send(app, method, uri, "application/json", body.to_string()).await
}

/// Deterministic CSV: two correlated blocks and a shifted cluster in rows
/// 0..20 on columns a, b.
fn csv(n: usize) -> String {
    let mut out = String::from("a,b,c,d,e\n");
    for i in 0..n {
        let t = (i as f64 * 0.37).sin();
        let u = (i as f64 * 1.91).cos();
        let w = (i as f64 * 0.73).sin() * (i as f64 * 0.11).cos();
        let (a, b) = if i < 20 { (4.0 + 0.05 * u, 4.0 + 0.05 * t) } else { (t + 0.3 * u, t - 0.2 * w) };
        writeln!(out, "{a},{b},{},{},{}", u + 0.1 * t, u - 0.4 * w, w + 0.2 * t).unwrap();
    }
    out
}

async fn upload(app: &Router, n: usize) -> String {
    let (status, info) = send(app, Method::POST, "/datasets", "text/csv", csv(n)).await;
    assert_eq!(status, StatusCode::CREATED, "{info}");
    info["id"].as_str().unwrap().to_string()
}

async fn new_session(app: &Router, n: usize) -> String {
    let dataset = upload(app, n).await;
    let (status, s) = json_call(app, Method::POST, "/sessions", json!({ "dataset_id": dataset, "seed": 3 })).await;
    assert_eq!(status, StatusCode::CREATED, "{s}");
    s["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn upload_reports_shape_and_never_dedups() {
    let app = app(ServiceConfig::default());
    let (status, info) = send(&app, Method::POST, "/datasets", "text/csv", "a,b\n1,2\n3,4\n").await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(info["n"], 2);
    assert_eq!(info["m"], 2);
    assert_eq!(info["column_names"], json!(["a", "b"]));
    assert_eq!(info["scaling"], "zscored");
    let (_, again) = send(&app, Method::POST, "/datasets", "text/csv", "a,b\n1,2\n3,4\n").await;
    assert_ne!(info["id"], again["id"]);
}

#[tokio::test]
async fn upload_options_and_categorical_columns() {
    let app = app(ServiceConfig::default());
    let body = "x;kind;y\n1;u;2\n2;r;1\n3;u;5\n4;r;3\n";
    let (status, info) = send(&app, Method::POST, "/datasets?delimiter=;&scale=none", "text/csv", body).await;
    assert_eq!(status, StatusCode::CREATED, "{info}");
    assert_eq!(info["m"], 4);
    assert_eq!(info["column_names"], json!(["x", "y", "kind=r", "kind=u"]));
    let (status, err) = send(&app, Method::POST, "/datasets?scale=maybe", "text/csv", body).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "request.invalid_option");
}

#[tokio::test]
async fn malformed_row_reports_line() {
    let app = app(ServiceConfig::default());
    let (status, err) = send(&app, Method::POST, "/datasets", "text/csv", "a,b\n1,2\n3\n5,6\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "csv.bad_row");
    assert_eq!(err["detail"]["line"], 3);
    assert!(err["message"].as_str().unwrap().contains("line 3"));
}

#[tokio::test]
async fn oversize_uploads_are_refused() {
    let app = app(ServiceConfig {
        max_upload_bytes: 64,
        ..ServiceConfig::default()
    });
    let (status, err) = send(&app, Method::POST, "/datasets", "text/csv", csv(30)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(err["code"], "upload.too_large");

    let boundary = "XBOUNDARY";
    let body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"d.csv\"\r\n\r\n{}\r\n--{boundary}--\r\n",
        csv(30)
    );
    let (status, err) = send(&app, Method::POST, "/datasets", &format!("multipart/form-data; boundary={boundary}"), body).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(err["code"], "upload.too_large");
}

#[tokio::test]
async fn multipart_upload_with_option_fields() {
    let app = app(ServiceConfig::default());
    let boundary = "XBOUNDARY";
    let body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"columns\"\r\n\r\na,c\r\n\
         --{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"d.csv\"\r\nContent-Type: text/csv\r\n\r\n{}\r\n--{boundary}--\r\n",
        csv(30)
    );
    let (status, info) = send(&app, Method::POST, "/datasets", &format!("multipart/form-data; boundary={boundary}"), body).await;
    assert_eq!(status, StatusCode::CREATED, "{info}");
    assert_eq!(info["n"], 30);
    assert_eq!(info["column_names"], json!(["a", "c"]));
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app(ServiceConfig::default());
    let (status, err) = get(&app, "/sessions/nope/view").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "session.not_found");
    let (status, err) = json_call(&app, Method::POST, "/sessions", json!({ "dataset_id": "nope" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "dataset.not_found");
}

#[tokio::test]
async fn exploration_loop() {
    let app = app(ServiceConfig::default());
    let id = new_session(&app, 120).await;
    let base = format!("/sessions/{id}");

    let (status, err) = get(&app, &format!("{base}/sample?which=1&seed=1")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "session.no_view");

    let (status, v0) = get(&app, &format!("{base}/view")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v0["version"], 0);
    assert_eq!(v0["coords"].as_array().unwrap().len(), 120);
    assert_eq!(v0["directions"].as_array().unwrap().len(), 2);
    assert_eq!(v0["axis_labels"][0].as_array().unwrap().len(), 5);
    assert!(v0["rows"].is_null());
    let g = v0["gains"].as_array().unwrap();
    assert!(g[0].as_f64().unwrap() >= g[1].as_f64().unwrap());

    let (status, sug) = json_call(&app, Method::POST, &format!("{base}/suggest"), json!({ "rows": (0..20).collect::<Vec<_>>() })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(sug["tau"], 0.5);
    let included: Vec<&str> = sug["attributes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["included"] == true)
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    assert_eq!(included.len(), 2);
    assert!(included.contains(&"a") && included.contains(&"b"));

    let (status, pcp) = get(&app, &format!("{base}/pcp?rows=0-19&tau=0.5")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(pcp["selection"].as_array().unwrap().len(), 20);
    assert_eq!(pcp["values"].as_array().unwrap().len(), 120);

    let tile = json!({ "rows": (0..20).collect::<Vec<_>>(), "cols": [0, 1], "label": "cluster", "version": 0 });
    let (status, r) = json_call(&app, Method::POST, &format!("{base}/tiles"), tile.clone()).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(r["version"], 1);
    let (status, err) = json_call(&app, Method::POST, &format!("{base}/tiles"), tile).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "session.stale_version");
    assert_eq!(err["detail"]["current"], 1);

    let (_, v1) = get(&app, &format!("{base}/view")).await;
    assert_eq!(v1["version"], 1);
    assert_ne!(v1["directions"], v0["directions"]);

    let (_, s1) = get(&app, &format!("{base}/sample?which=2&seed=7")).await;
    let (_, s2) = get(&app, &format!("{base}/sample?which=2&seed=7")).await;
    let (_, s3) = get(&app, &format!("{base}/sample?which=2&seed=8")).await;
    assert_eq!(s1, s2);
    assert_ne!(s1["coords"], s3["coords"]);
    let (status, _) = get(&app, &format!("{base}/sample?which=3&seed=7")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, r) = send(&app, Method::DELETE, &format!("{base}/tiles/last?version=0"), "application/json", Body::empty()).await;
    assert_eq!(status, StatusCode::CONFLICT, "{r}");
    let (status, r) = send(&app, Method::DELETE, &format!("{base}/tiles/last?version=1"), "application/json", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["removed"]["label"], "cluster");
    assert_eq!(r["version"], 2);
    let (_, v2) = get(&app, &format!("{base}/view")).await;
    assert_eq!(v2["directions"], v0["directions"]);
    assert_eq!(v2["gains"], v0["gains"]);
    assert_eq!(v2["coords"], v0["coords"]);
    let (status, err) = send(&app, Method::DELETE, &format!("{base}/tiles/last"), "application/json", Body::empty()).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "session.no_tiles");

    let hyp = json!({ "rows": (20..120).collect::<Vec<_>>(), "partition": [[0, 1], [2, 3, 4]] });
    let (status, r) = json_call(&app, Method::PUT, &format!("{base}/hypothesis"), hyp).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["version"], 3);
    let (status, err) = json_call(&app, Method::PUT, &format!("{base}/hypothesis"), json!({ "partition": [[0], [0, 1]] })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "hypothesis.invalid");

    let (_, info) = get(&app, &base).await;
    assert_eq!(info["version"], 3);
    assert_eq!(info["seed"], 3);
    assert_eq!(info["n"], 120);
}

#[tokio::test]
async fn view_numbers_survive_json_exactly() {
    let state = AppState::new(ServiceConfig::default());
    let app = router(state);
    let id = new_session(&app, 60).await;
    let (_, a) = get(&app, &format!("/sessions/{id}/view")).await;
    let view: corand::ViewResult = serde_json::from_value(a.clone()).unwrap();
    assert_eq!(serde_json::to_value(&view).unwrap()["gains"], a["gains"]);
    let norm: f64 = view.directions[0].iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
}

#[tokio::test]
async fn large_views_are_downsampled_deterministically() {
    let app = app(ServiceConfig {
        max_points: 50,
        ..ServiceConfig::default()
    });
    let id = new_session(&app, 120).await;
    let (_, v) = get(&app, &format!("/sessions/{id}/view")).await;
    let rows: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r.as_u64().unwrap()).collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(v["coords"].as_array().unwrap().len(), 50);
    let (_, again) = get(&app, &format!("/sessions/{id}/view")).await;
    assert_eq!(v, again);
    let (_, s) = get(&app, &format!("/sessions/{id}/sample?which=1&seed=2")).await;
    assert_eq!(s["rows"], v["rows"]);
    assert_eq!(s["coords"].as_array().unwrap().len(), 50);
}

#[tokio::test]
async fn snapshots_are_written_after_mutations() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(ServiceConfig {
        snapshot_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    });
    let id = new_session(&app, 40).await;
    json_call(&app, Method::POST, &format!("/sessions/{id}/tiles"), json!({ "rows": [0, 1, 2], "cols": [0, 1] })).await;
    let text = std::fs::read_to_string(dir.path().join(format!("{id}.json"))).unwrap();
    let snap: corand::SessionSnapshot = serde_json::from_str(&text).unwrap();
    assert_eq!(snap.version, 1);
    assert_eq!(snap.user_tiles.len(), 1);
}

#[tokio::test]
async fn malformed_bodies_use_the_error_envelope() {
    let app = app(ServiceConfig::default());
    let id = new_session(&app, 30).await;
    let (status, err) = send(&app, Method::POST, &format!("/sessions/{id}/tiles"), "application/json", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "request.invalid_body");
    let (status, err) = json_call(&app, Method::POST, &format!("/sessions/{id}/tiles"), json!({ "rows": [99], "cols": [0] })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "tile.invalid");
    let (status, err) = get(&app, &format!("/sessions/{id}/pcp?rows=5-2")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "request.invalid_rows");
}
