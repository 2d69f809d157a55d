use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use otr_core::demos::{run_demo, ClockMode, DemoName};
use otr_core::Trace;
use otr_server::router;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(name: DemoName) -> Router {
    let out = run_demo(name, ClockMode::Logical).unwrap();
    router(Trace::from_bytes(&out.trace, out.schema).unwrap(), None)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let res = app
        .clone()
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = res.status();
    let body = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

#[tokio::test]
async fn summary() {
    let (status, body) = get(&app(DemoName::Depth), "/api/summary").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!({"event_count": 23, "top_frames": [0], "truncated_count": 0, "partial_event": false})
    );
}

#[tokio::test]
async fn frames() {
    let app = app(DemoName::Exception);
    let (status, g) = get(&app, "/api/frames/1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g["name"], "g");
    assert_eq!(g["args"], json!(["3"]));
    assert_eq!(
        g["outcome"],
        json!({"kind": "raised", "value": "Failure \"boom\""})
    );
    assert_eq!(g["children"], json!([2]));
    assert_eq!(g["event_range"], json!([1, 4]));
    assert_eq!(g["location"], json!({"file": "exn.ml", "line": 2}));
    assert_eq!(get(&app, "/api/frames/9").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/frames/x").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn events() {
    let app = app(DemoName::Depth);
    let (status, body) = get(&app, "/api/events?from=0&to=2").await;
    assert_eq!(status, StatusCode::OK);
    let events = body["events"].as_array().unwrap();
    assert_eq!(events.len(), 2);
    assert_eq!(events[0]["kind"], "call");
    assert_eq!(events[0]["name"], "depth");
    assert_eq!(events[1]["kind"], "match");
    assert_eq!(events[1]["site"], 0);
    assert_eq!(
        events[1]["values"],
        json!(["Node [Leaf 1; Node [Leaf 2; Leaf 3]]"])
    );
    assert_eq!(
        get(&app, "/api/events").await.1["events"]
            .as_array()
            .unwrap()
            .len(),
        23
    );
    assert_eq!(
        get(&app, "/api/events?from=5&to=2").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(get(&app, "/api/events?from=-1").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn step() {
    let app = app(DemoName::Exception);
    let (status, body) = get(&app, "/api/step?at=3&op=next").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["cursor"], 4);
    let stack: Vec<_> = body["stack"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].clone())
        .collect();
    assert_eq!(stack, [json!("f"), json!("g")]);
    assert_eq!(body["stack"][1]["last_closed_child"]["name"], "h");
    assert_eq!(body["location"], json!({"file": "exn.ml", "line": 2}));

    let (_, over) = get(&app, "/api/step?at=0&op=over").await;
    assert_eq!(over["cursor"], 6);
    assert_eq!(over["location"], Value::Null);

    assert_eq!(
        get(&app, "/api/step?at=0&op=out").await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        get(&app, "/api/step?at=0&op=sideways").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        get(&app, "/api/step?at=99&op=next").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(get(&app, "/api/step?op=next").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn search() {
    let app = app(DemoName::Depth);
    let (status, body) = get(&app, "/api/search?fn=depth.fun").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["frames"].as_array().unwrap().len(), 4);
    assert_eq!(get(&app, "/api/search?fn=nope").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/search").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn chrome_export_matches_the_library() {
    let app = app(DemoName::Depth);
    let (status, body) = get(&app, "/api/export/chrome?logical=true").await;
    assert_eq!(status, StatusCode::OK);
    let golden = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/tests/golden/depth.chrome.json"
    ))
    .unwrap();
    assert_eq!(body, serde_json::from_str::<Value>(&golden).unwrap());
    assert!(otr_core::export::check_chrome(&body).is_ok());
    assert_eq!(
        get(&app, "/api/export/chrome?logical=maybe").await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn unknown_api_paths_are_json_404() {
    let (status, body) = get(&app(DemoName::Depth), "/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn static_assets_are_served_beside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>explorer</h1>").unwrap();
    let out = run_demo(DemoName::Depth, ClockMode::Logical).unwrap();
    let app = router(
        Trace::from_bytes(&out.trace, out.schema).unwrap(),
        Some(dir.path().to_path_buf()),
    );
    let res = app
        .clone()
        .oneshot(Request::get("/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(
        &to_bytes(res.into_body(), usize::MAX).await.unwrap()[..],
        b"<h1>explorer</h1>"
    );
    let res = app
        .clone()
        .oneshot(Request::get("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(get(&app, "/api/summary").await.0, StatusCode::OK);
}
