use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use verispace_core::optimize::state_seed;
use verispace_core::presets::exemplar_scenario;
use verispace_core::treespace::ValuatorPool;
use verispace_core::{PtConfig, PtOptimizer};
use verispace_service::{router, Service, ServiceOptions};

fn app(dir: Option<&std::path::Path>) -> (Arc<Service>, Router) {
    let svc = Service::open(ServiceOptions {
        data_dir: dir.map(Into::into),
    })
    .unwrap();
    (svc.clone(), router(svc))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn quick() -> Value {
    json!({"convergence_length": 200})
}

async fn create(app: &Router, scenario: Value, seed: u64) -> String {
    let (st, v) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"scenario": scenario, "config": quick(), "seed": seed})),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_owned()
}

async fn ready(app: &Router, id: &str) -> Value {
    let start = Instant::now();
    loop {
        let (st, v) = call(app, "GET", &format!("/sessions/{id}/recommendation"), None).await;
        assert_eq!(st, StatusCode::OK);
        if v["status"] != "computing" {
            return v;
        }
        assert!(
            start.elapsed() < Duration::from_secs(120),
            "recommendation never finished"
        );
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
}

async fn submit(app: &Router, id: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/results"), Some(body)).await
}

#[tokio::test]
async fn catalogue_lists_presets_and_rules() {
    let (_, app) = app(None);
    let (st, v) = call(&app, "GET", "/scenarios", None).await;
    assert_eq!(st, StatusCode::OK);
    let names: Vec<&str> = v["presets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "exemplar",
            "satellite-small",
            "satellite-medium",
            "satellite-large",
            "satellite-full"
        ]
    );
    assert_eq!(v["presets"][2]["activities"].as_array().unwrap().len(), 10);
    assert_eq!(v["rules"].as_object().unwrap().len(), 4);
    assert_eq!(v["defaults"]["upperThreshold"], 0.95);
}

#[tokio::test]
async fn new_session_matches_the_engine() {
    let (_, app) = app(None);
    let id = create(&app, json!("exemplar"), 7).await;
    let (_, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let scn = exemplar_scenario("Low").unwrap();
    let prior = scn.posterior(&scn.initial_state()).unwrap();
    assert_eq!(s["posterior"].as_f64().unwrap(), prior);
    assert_eq!(s["status"], "active");
    assert_eq!(s["state"]["time"], 0);

    let rec = ready(&app, &id).await;
    assert_eq!(rec["status"], "ready");
    let origin = scn.initial_state();
    let cfg: PtConfig = serde_json::from_value(quick()).unwrap();
    let out = PtOptimizer::new(cfg)
        .run(
            &origin,
            state_seed(7, &origin),
            &mut ValuatorPool::new(&scn),
        )
        .unwrap();
    assert_eq!(rec["action"], out.fvt.root_action().to_string());
    assert_eq!(
        rec["fvtExpectedValue"].as_f64().unwrap(),
        out.fvt.expected_value.units()
    );

    let (_, tree) = call(&app, "GET", &format!("/sessions/{id}/tree"), None).await;
    assert_eq!(tree["root"]["action"], rec["action"]);
    assert_eq!(tree["expectedValue"], rec["fvtExpectedValue"]);
    check_branches(&tree["root"]);
}

fn check_branches(node: &Value) {
    let Some(branches) = node["branch"].as_array() else {
        return;
    };
    let total: f64 = branches
        .iter()
        .map(|b| b["probability"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9, "siblings sum to {total}");
    for b in branches {
        assert!(b["posterior"].is_number());
        check_branches(&b["child"]);
    }
}

#[tokio::test]
async fn sessions_are_isolated() {
    let (_, app) = app(None);
    let a = create(&app, json!("exemplar"), 1).await;
    let b = create(&app, json!("exemplar"), 1).await;
    assert_ne!(a, b);
    let (st, _) = submit(
        &app,
        &a,
        json!({"activity": "A1", "result": true, "override": true}),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    let (_, vb) = call(&app, "GET", &format!("/sessions/{b}"), None).await;
    assert_eq!(vb["state"]["time"], 0);
    assert!(vb["history"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn recommended_flow_with_rework() {
    let (_, app) = app(None);
    let id = create(&app, json!({"preset": "exemplar", "rule": "High"}), 3).await;
    let rec = ready(&app, &id).await;
    let action = rec["action"].as_str().unwrap().to_owned();
    assert_ne!(action, "Stop");

    let other = ["A1", "A2", "A3", "A4"]
        .into_iter()
        .find(|a| *a != action)
        .unwrap();
    let (st, err) = submit(&app, &id, json!({"activity": other, "result": true})).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["code"], "not_recommended");

    // Under `High` any failure short of deployment confidence triggers rework.
    let (st, v) = submit(&app, &id, json!({"activity": action, "result": false})).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let event = &v["history"][0];
    assert_eq!(event["rework"], true);
    let scn = exemplar_scenario("High").unwrap();
    let k = scn.activity_index(&action.as_str().into()).unwrap();
    let expected = scn.costs().activities[scn.activity_id(k)]
        .rework
        .scale(scn.costs().penalty[0]);
    assert_eq!(event["reworkCost"].as_f64().unwrap(), expected.units());
    assert_eq!(v["state"]["results"][k], 1);
    assert_eq!(v["totals"]["reworkCost"], event["reworkCost"]);
    assert_eq!(v["recommendation"]["status"], "computing");

    let (st, err) = submit(
        &app,
        &id,
        json!({"activity": action, "result": true, "override": true}),
    )
    .await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["code"], "already_verified");
}

#[tokio::test]
async fn passing_to_confidence_deploys() {
    let (_, app) = app(None);
    let id = create(&app, json!("exemplar"), 2).await;
    let mut last = Value::Null;
    for a in ["A1", "A2", "A3", "A4"] {
        let (st, v) = submit(
            &app,
            &id,
            json!({"activity": a, "result": true, "override": true}),
        )
        .await;
        assert_eq!(st, StatusCode::OK, "{v}");
        last = v;
        if last["status"] != "active" {
            break;
        }
    }
    assert_eq!(last["status"], "deployed");
    assert!(last["posterior"].as_f64().unwrap() >= 0.95);
    let revenue = last["totals"]["revenue"].as_f64().unwrap();
    assert!(revenue > 0.0);
    assert_eq!(last["recommendation"]["status"], "idle");
    let (st, err) = submit(&app, &id, json!({"activity": "Stop", "override": true})).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["code"], "terminal_session");
    let (_, tree) = call(&app, "GET", &format!("/sessions/{id}/tree"), None).await;
    assert_eq!(tree["status"], "idle");
}

#[tokio::test]
async fn accepting_a_stop_ends_the_session() {
    let (_, app) = app(None);
    let id = create(&app, json!("exemplar"), 4).await;
    let (st, v) = submit(&app, &id, json!({"activity": "NA", "override": true})).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "stopped");
    assert_eq!(v["history"][0]["activity"], "Stop");
}

#[tokio::test]
async fn errors_carry_code_and_message() {
    let (_, app) = app(None);
    let cases = [
        (
            call(&app, "GET", "/sessions/s999999", None).await,
            StatusCode::NOT_FOUND,
            "not_found",
        ),
        (
            call(&app, "GET", "/nowhere", None).await,
            StatusCode::NOT_FOUND,
            "not_found",
        ),
        (
            call(&app, "POST", "/sessions", Some(json!({"scenario": "nope"}))).await,
            StatusCode::BAD_REQUEST,
            "unknown_scenario",
        ),
        (
            call(
                &app,
                "POST",
                "/sessions",
                Some(json!({"scenario": {"preset": "exemplar", "rule": "Mid"}})),
            )
            .await,
            StatusCode::BAD_REQUEST,
            "unknown_rule",
        ),
        (
            call(
                &app,
                "POST",
                "/sessions",
                Some(json!({"scenario": "exemplar", "config": {"n_it": 0}})),
            )
            .await,
            StatusCode::BAD_REQUEST,
            "invalid_config",
        ),
        (
            call(&app, "POST", "/sessions", Some(json!({"seed": 1}))).await,
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
    ];
    for ((status, body), want_status, want_code) in cases {
        assert_eq!(status, want_status, "{body}");
        assert_eq!(body["code"], want_code, "{body}");
        assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    let id = create(&app, json!("exemplar"), 1).await;
    let (st, body) = submit(
        &app,
        &id,
        json!({"activity": "A7", "result": true, "override": true}),
    )
    .await;
    assert_eq!(
        (st, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("unknown_activity"))
    );
}

#[tokio::test]
async fn superseded_recommendations_are_replaced() {
    let (_, app) = app(None);
    let id = create(
        &app,
        json!({"preset": "satellite-medium", "rule": "Low"}),
        5,
    )
    .await;
    let (st, v) = submit(
        &app,
        &id,
        json!({"activity": "A23", "result": true, "override": true}),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let rec = ready(&app, &id).await;
    assert_eq!(rec["status"], "ready");
    assert_eq!(rec["state"], v["state"]);
    assert_eq!(rec["state"]["time"], 1);
}

#[tokio::test]
async fn restart_replays_the_event_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before, rec_before) = {
        let (_, app) = app(Some(dir.path()));
        let id = create(&app, json!({"preset": "exemplar", "rule": "Low-high"}), 9).await;
        for (a, r) in [("A3", false), ("A2", true)] {
            let (st, v) = submit(
                &app,
                &id,
                json!({"activity": a, "result": r, "override": true}),
            )
            .await;
            assert_eq!(st, StatusCode::OK, "{v}");
        }
        let rec = ready(&app, &id).await;
        let (_, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
        (id, s, rec)
    };
    let log = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(log.lines().count(), 3);

    let (_, app) = app(Some(dir.path()));
    let rec_after = ready(&app, &id).await;
    assert_eq!(rec_after, rec_before);
    let (_, after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(after, before);
    let fresh = create(&app, json!("exemplar"), 1).await;
    assert_ne!(fresh, id, "ids continue after replay");
}
