mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use codequal::interface::service::{router, SCHEMA_HEADER};
use codequal::interface::{Engine, Settings};
use codequal::reward::{ExecutorError, TestExecutor, TestReport};
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{fake_pool, problems};

fn app(executor: Option<Arc<dyn TestExecutor>>) -> Router {
    router(Engine::new(Settings::default(), executor).unwrap(), problems())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Option<String>, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let retry = response.headers().get("retry-after").map(|v| v.to_str().unwrap().to_string());
    assert_eq!(response.headers()[SCHEMA_HEADER], "1");
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
    (status, retry, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn ideal(problem_id: &str) -> String {
    let record = problems().get(problem_id).unwrap().clone();
    format!("```python\n{}```\n", record.ideal_solution)
}

#[tokio::test]
async fn health_and_rules() {
    let app = app(None);
    let (status, _, body) = call(&app, "GET", "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["problems"], 5);
    assert_eq!(body["test_runner"], "not_configured");

    let (status, _, rules) = call(&app, "GET", "/v1/rules?category=performance", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rules.as_array().unwrap().len(), 7);
    let (status, _, body) = call(&app, "GET", "/v1/rules?category=nope", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn score_with_runner() {
    let app = app(Some(Arc::new(fake_pool("ok", 2))));
    let (status, _, body) =
        call(&app, "POST", "/v1/score", Some(json!({"completion": ideal("two-sum"), "problem_id": "two-sum"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["schema_version"], 1);
    assert_eq!(body["breakdown"]["r_correct"], 1.0);
    assert_eq!(body["breakdown"]["test_report"]["total_tests"], 3);
    assert_eq!(body["breakdown"]["r_total"], 1.0);
}

#[tokio::test]
async fn score_without_problem_or_runner() {
    let app = app(None);
    let completion = "```python\nimport pickle\n\nDATA = pickle.loads(b'')\n```";
    let (status, _, body) = call(&app, "POST", "/v1/score", Some(json!({"completion": completion}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["breakdown"]["r_quality"], 1.0 / 6.0);
    assert_eq!(body["breakdown"]["correctness"]["status"], "unavailable");
}

#[tokio::test]
async fn overrides_change_the_fingerprint() {
    let app = app(None);
    let completion = "```python\nimport pickle\n\nDATA = pickle.loads(b'')\n```";
    let (_, _, base) = call(&app, "POST", "/v1/score", Some(json!({"completion": completion}))).await;
    let (status, _, tuned) = call(
        &app,
        "POST",
        "/v1/score",
        Some(json!({"completion": completion, "config_overrides": {"analyzer": {"disabled_rules": ["SEC-PICKLE"]}}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{tuned}");
    assert_eq!(tuned["breakdown"]["r_quality"], 1.0);
    assert_ne!(base["config_fingerprint"], tuned["config_fingerprint"]);
    let (status, _, _) =
        call(&app, "POST", "/v1/score", Some(json!({"completion": completion, "config_overrides": {"analyzer": {"colour": 1}}})))
            .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let app = app(None);
    let (status, _, body) = call(&app, "POST", "/v1/score", Some(json!({"text": "x"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
    let (status, _, _) = call(&app, "POST", "/v1/score", Some(json!({"completion": "", "problem_id": "missing"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let overlapping = json!({
        "rollouts": [{"rollout_id": "a", "completion": ""}, {"rollout_id": "b", "completion": ""}],
        "groups": [{"start": 0, "end": 2}, {"start": 1, "end": 2}],
    });
    let (status, _, _) = call(&app, "POST", "/v1/batch", Some(overlapping)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn batch_advantages() {
    let app = app(Some(Arc::new(fake_pool("ok", 2))));
    let stub = format!("```python\n{}```", problems().get("fizzbuzz").unwrap().initial_code);
    let request = json!({
        "rollouts": [
            {"rollout_id": "good", "completion": ideal("fizzbuzz"), "problem_id": "fizzbuzz"},
            {"rollout_id": "stub", "completion": stub, "problem_id": "fizzbuzz"},
            {"rollout_id": "lost", "completion": "", "problem_id": "unknown"},
            {"rollout_id": "none", "completion": "no code", "problem_id": "fizzbuzz"},
        ],
        "groups": [{"start": 0, "end": 4}],
    });
    let (status, _, body) = call(&app, "POST", "/v1/batch", Some(request)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let advantages = body["groups"][0]["advantages"].as_array().unwrap();
    assert!(advantages[2].is_null());
    assert!(body["results"][2]["error"].is_string());
    let scored: Vec<f64> = [0, 1, 3].iter().map(|&i| advantages[i].as_f64().unwrap()).collect();
    assert!(scored.iter().sum::<f64>().abs() < 1e-9);
    assert!(scored[0] > scored[1] && scored[1] > scored[2]);
}

struct Busy;

impl TestExecutor for Busy {
    fn run_tests(&self, _: &str, _: &str) -> Result<TestReport, ExecutorError> {
        Err(ExecutorError { message: "all workers busy".into(), retryable: true })
    }
}

#[tokio::test]
async fn busy_runner_is_503() {
    let app = app(Some(Arc::new(Busy)));
    let (status, retry, body) =
        call(&app, "POST", "/v1/score", Some(json!({"completion": ideal("two-sum"), "problem_id": "two-sum"}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(retry.as_deref(), Some("1"));
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn service_and_cli_agree() {
    let app = app(Some(Arc::new(fake_pool("ok", 1))));
    let completions = std::fs::read_to_string(common::fixtures().join("completions.jsonl")).unwrap();
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_codequal"))
        .current_dir(common::fixtures())
        .args(["reward", "--problems", "problems.jsonl", "--completions", "completions.jsonl", "--format", "json"])
        .args(["--runner", "python3 fake_runner.py"])
        .output()
        .unwrap();
    let cli: Vec<Value> = String::from_utf8(output.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for (line, row) in completions.lines().zip(&cli) {
        let input: Value = serde_json::from_str(line).unwrap();
        let body = json!({"completion": input["completion"], "problem_id": input["problem_id"]});
        let (status, _, served) = call(&app, "POST", "/v1/score", Some(body)).await;
        assert_eq!(status, StatusCode::OK);
        let mut served = served["breakdown"].clone();
        let mut local = row["breakdown"].clone();
        // Wall-clock durations are the only field allowed to differ.
        for b in [&mut served, &mut local] {
            if let Some(report) = b.get_mut("test_report").filter(|r| r.is_object()) {
                report["duration_seconds"] = json!(0.0);
            }
        }
        assert_eq!(served, local, "{}", input["rollout_id"]);
    }
}
