use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use taxoalign::data::RUNNING_EXAMPLE;
use taxoalign::engine::Budget;
use taxoalign_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

const TWO_LEAF: &str = "taxonomy 1 a\n(A B C)\ntaxonomy 2 b\n(D E F)\narticulations\n[1.B equals 2.E]\n[1.C equals 2.F]\n";

fn app(config: ServiceConfig) -> Router {
    router(AppState::new(config))
}

async fn raw(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let (status, text) = raw(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

async fn create(app: &Router, text: &str) -> String {
    let (status, body) = call(app, "POST", "/api/session", text).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn full_workflow_on_running_example() {
    let app = app(ServiceConfig::default());
    let id = create(&app, RUNNING_EXAMPLE).await;
    let base = format!("/api/session/{id}");

    let (s, b) = call(&app, "GET", &format!("{base}/consistency"), "").await;
    assert_eq!((s, b), (StatusCode::OK, json!({ "consistent": false })));

    let (s, d) = call(&app, "GET", &format!("{base}/diagnosis"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert!(d["mus"].as_array().unwrap().contains(&json!(1)));
    assert_eq!(d["repairs"], json!([{ "remove": [1] }]));

    let (s, b) = call(&app, "GET", &format!("{base}/worlds"), "").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{b}");

    let (s, summary) = call(&app, "POST", &format!("{base}/repair"), r#"{"remove":[1]}"#).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["articulations"][1]["disabled"], json!(true));
    assert_eq!(summary["articulations"].as_array().unwrap().len(), 6);

    let (_, b) = call(&app, "GET", &format!("{base}/consistency"), "").await;
    assert_eq!(b, json!({ "consistent": true }));

    let (s, w) = call(&app, "GET", &format!("{base}/worlds?limit=2"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(w["total"], json!(7));
    assert_eq!(w["worlds"].as_array().unwrap().len(), 2);

    let (_, m) = call(&app, "GET", &format!("{base}/mir"), "").await;
    let entries = m["table"]["entries"].as_array().unwrap();
    let dg = entries.iter().find(|e| e["left"] == "1.D" && e["right"] == "2.A").unwrap();
    assert_eq!(dg["mask"], json!(["<"]));

    let (_, q) = call(&app, "GET", &format!("{base}/question"), "").await;
    assert_eq!(q["surviving"], json!(7));
    assert_eq!((q["question"]["left"].clone(), q["question"]["right"].clone()), (json!("1.A"), json!("2.G")));

    let answer = r#"{"left":"1.A","right":"2.G","mask":">"}"#;
    let (s, a1) = call(&app, "POST", &format!("{base}/answer"), answer).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(a1["surviving"], json!(3));
    let (_, a2) = call(&app, "POST", &format!("{base}/answer"), answer).await;
    assert_eq!(a1, a2);

    let full = r#"{"left":"1.A","right":"2.G","mask":["==","<",">","><","!"]}"#;
    let (_, a3) = call(&app, "POST", &format!("{base}/answer"), full).await;
    assert_eq!(a3["surviving"], json!(3));

    let (s, b) = call(&app, "POST", &format!("{base}/answer"), r#"{"left":"1.A","right":"2.G","mask":"><"}"#).await;
    assert_eq!(s, StatusCode::CONFLICT, "{b}");
    let (_, q) = call(&app, "GET", &format!("{base}/question"), "").await;
    assert_eq!(q["surviving"], json!(3));

    let (s, _) = call(&app, "POST", &format!("{base}/reset-answers"), "").await;
    assert_eq!(s, StatusCode::OK);
    let (_, q) = call(&app, "GET", &format!("{base}/question"), "").await;
    assert_eq!(q["surviving"], json!(7));

    let (s, dot) = raw(&app, "GET", &format!("{base}/rcg/0"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert!(dot.starts_with("digraph world_0 {"));
    let (s, _) = call(&app, "GET", &format!("{base}/rcg/7"), "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", &format!("{base}/rcg/x"), "").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, c) = call(&app, "GET", &format!("{base}/cluster"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(c["matrix_csv"].as_str().unwrap().lines().count(), 8);

    let (s, p) = call(&app, "GET", &format!("{base}/provenance?left=1.D&right=2.A&mask=%3C"), "").await;
    assert_eq!(s, StatusCode::OK, "{p}");
    assert_eq!(p["articulations"], json!([2]));
    let (s, _) = call(&app, "GET", &format!("{base}/provenance?left=1.D&right=2.A&mask=!"), "").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "GET", &format!("{base}/provenance?left=1.D"), "").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (_, summary) = call(&app, "GET", &base, "").await;
    let actions: Vec<&str> = summary["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["action"].as_str().unwrap())
        .collect();
    assert_eq!(actions, vec!["repair", "answer", "reset_answers"]);

    let (_, summary) = call(&app, "POST", &format!("{base}/repair"), r#"{"restore":[1]}"#).await;
    assert_eq!(summary["articulations"][1]["disabled"], json!(false));
    let (_, b) = call(&app, "GET", &format!("{base}/consistency"), "").await;
    assert_eq!(b, json!({ "consistent": false }));
}

#[tokio::test]
async fn malformed_requests() {
    let app = app(ServiceConfig::default());
    let (s, b) = call(&app, "POST", "/api/session", "taxonomy 1 a\n(A B\n").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(b["error"], json!("parse_error"));
    assert!(b["errors"][0]["span"]["line"].is_number());

    let (s, _) = call(&app, "GET", "/api/session/nope", "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/api/jobs/nope", "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let id = create(&app, TWO_LEAF).await;
    let base = format!("/api/session/{id}");
    for body in ["{", r#"{"remove":"x"}"#, r#"{"remove":[9]}"#] {
        let (s, _) = call(&app, "POST", &format!("{base}/repair"), body).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    }
    for body in [
        "not json",
        r#"{"left":"1.A","right":"2.D"}"#,
        r#"{"left":"2.D","right":"1.A","mask":"<"}"#,
        r#"{"left":"1.A","right":"2.D","mask":"{}"}"#,
        r#"{"left":"1.Q","right":"2.D","mask":"<"}"#,
    ] {
        let (s, _) = call(&app, "POST", &format!("{base}/answer"), body).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    }
    let (s, _) = call(&app, "GET", &format!("{base}/worlds?limit=abc"), "").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn gets_are_side_effect_free() {
    let app = app(ServiceConfig::default());
    let id = create(&app, TWO_LEAF).await;
    let base = format!("/api/session/{id}");
    let before = raw(&app, "GET", &base, "").await;
    for route in ["consistency", "diagnosis", "worlds", "mir", "question", "cluster", "rcg/0"] {
        let first = raw(&app, "GET", &format!("{base}/{route}"), "").await;
        let second = raw(&app, "GET", &format!("{base}/{route}"), "").await;
        assert_eq!(first, second, "{route}");
        assert_eq!(first.0, StatusCode::OK, "{route}: {}", first.1);
    }
    assert_eq!(raw(&app, "GET", &base, "").await, before);
}

#[tokio::test]
async fn persisted_sessions_restore_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        data_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let first = app(config.clone());
    let id = create(&first, RUNNING_EXAMPLE).await;
    let base = format!("/api/session/{id}");
    call(&first, "POST", &format!("{base}/repair"), r#"{"remove":[1]}"#).await;
    call(&first, "POST", &format!("{base}/answer"), r#"{"left":"1.A","right":"2.G","mask":">"}"#).await;
    let routes = ["", "/mir", "/question", "/worlds", "/cluster", "/rcg/3", "/diagnosis", "/consistency"];
    let mut before = Vec::new();
    for r in routes {
        before.push(raw(&first, "GET", &format!("{base}{r}"), "").await);
    }

    let second = app(config.clone());
    for (r, expected) in routes.iter().zip(&before) {
        assert_eq!(&raw(&second, "GET", &format!("{base}{r}"), "").await, expected, "{r}");
    }
    let (s, _) = call(&second, "GET", "/api/session/0123456789abcdef", "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&second, "GET", "/api/session/..%2Fescape", "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    std::fs::write(dir.path().join("badbadbadbadbad0.json"), "{ not json").unwrap();
    let (s, b) = call(&second, "GET", "/api/session/badbadbadbadbad0", "").await;
    assert_eq!(s, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(b["error"], json!("corrupt_record"));
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app(ServiceConfig::default());
    let a = create(&app, RUNNING_EXAMPLE).await;
    let b = create(&app, RUNNING_EXAMPLE).await;
    assert_ne!(a, b);
    for id in [&a, &b] {
        call(&app, "POST", &format!("/api/session/{id}/repair"), r#"{"remove":[1]}"#).await;
    }
    let (uri_a, uri_b) = (format!("/api/session/{a}/answer"), format!("/api/session/{b}/answer"));
    let answer_a = call(
        &app,
        "POST",
        &uri_a,
        r#"{"left":"1.A","right":"2.G","mask":">"}"#,
    );
    let answer_b = call(
        &app,
        "POST",
        &uri_b,
        r#"{"left":"1.A","right":"2.G","mask":"><"}"#,
    );
    let ((_, ra), (_, rb)) = tokio::join!(answer_a, answer_b);
    assert_eq!(ra["surviving"], json!(3));
    assert_eq!(rb["surviving"], json!(4));
    let (_, qa) = call(&app, "GET", &format!("/api/session/{a}/question"), "").await;
    let (_, qb) = call(&app, "GET", &format!("/api/session/{b}/question"), "").await;
    assert_eq!(qa["surviving"], json!(3));
    assert_eq!(qb["surviving"], json!(4));
    call(&app, "POST", &format!("/api/session/{a}/repair"), r#"{"restore":[1]}"#).await;
    let (_, cb) = call(&app, "GET", &format!("/api/session/{b}/consistency"), "").await;
    assert_eq!(cb, json!({ "consistent": true }));
}

#[tokio::test]
async fn slow_computations_are_polled() {
    let app = app(ServiceConfig {
        job_wait: Duration::ZERO,
        ..ServiceConfig::default()
    });
    let id = create(&app, RUNNING_EXAMPLE).await;
    call(&app, "POST", &format!("/api/session/{id}/repair"), r#"{"remove":[1]}"#).await;
    let (s, pending) = call(&app, "GET", &format!("/api/session/{id}/worlds"), "").await;
    assert_eq!(s, StatusCode::ACCEPTED, "{pending}");
    let poll = pending["poll"].as_str().unwrap().to_string();
    let mut status = Value::Null;
    for _ in 0..200 {
        let (s, j) = call(&app, "GET", &poll, "").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(j["session"], json!(id));
        status = j["status"].clone();
        if status != json!("running") {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(status, json!("done"));
    let (s, w) = call(&app, "GET", &format!("/api/session/{id}/worlds"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(w["total"], json!(7));
}

#[tokio::test]
async fn budget_exhaustion_is_reported() {
    let app = app(ServiceConfig {
        budget: Budget::default().with_max_worlds(2),
        ..ServiceConfig::default()
    });
    let id = create(&app, RUNNING_EXAMPLE).await;
    call(&app, "POST", &format!("/api/session/{id}/repair"), r#"{"remove":[1]}"#).await;
    let (s, w) = call(&app, "GET", &format!("/api/session/{id}/worlds"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(w["truncated"], json!(true));
    let (s, b) = call(&app, "GET", &format!("/api/session/{id}/mir"), "").await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(b["error"], json!("budget_exceeded"));

    let tight = app_with_branches(1);
    let id = create(&tight, RUNNING_EXAMPLE).await;
    let (s, _) = call(&tight, "GET", &format!("/api/session/{id}/diagnosis"), "").await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
}

fn app_with_branches(n: u64) -> Router {
    app(ServiceConfig {
        budget: Budget::default().with_max_branches(n),
        ..ServiceConfig::default()
    })
}

#[tokio::test]
async fn cors_is_opt_in() {
    let open = app(ServiceConfig {
        allow_origin: Some("http://localhost:5173".into()),
        ..ServiceConfig::default()
    });
    let req = Request::builder()
        .method("GET")
        .uri("/api/session/none")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = open.oneshot(req).await.unwrap();
    assert_eq!(
        resp.headers().get("access-control-allow-origin").unwrap(),
        "http://localhost:5173"
    );
    let closed = app(ServiceConfig::default());
    let req = Request::builder()
        .uri("/api/session/none")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = closed.oneshot(req).await.unwrap();
    assert!(resp.headers().get("access-control-allow-origin").is_none());
}
