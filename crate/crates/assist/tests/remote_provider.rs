use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use rta_assist::{
    build_provider, AssistError, Assistant, DriftInput, Feature, ProviderConfig, ProviderError, ProviderKind, SchemaError,
};
use serde_json::{json, Value};

#[derive(Clone, Default)]
struct Mock {
    replies: Arc<Mutex<Vec<(StatusCode, Value, u64)>>>,
    seen: Arc<Mutex<Vec<(HeaderMap, Value)>>>,
}

async fn handle(State(mock): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    mock.seen.lock().unwrap().push((headers, body));
    let (status, reply, delay) = {
        let mut replies = mock.replies.lock().unwrap();
        if replies.len() > 1 {
            replies.remove(0)
        } else {
            replies[0].clone()
        }
    };
    tokio::time::sleep(Duration::from_millis(delay)).await;
    (status, Json(reply))
}

fn chat(content: &str) -> Value {
    json!({"id": "x", "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]})
}

async fn serve(replies: Vec<(StatusCode, Value, u64)>) -> (Mock, String) {
    let mock = Mock { replies: Arc::new(Mutex::new(replies)), ..Default::default() };
    let app = Router::new().route("/v1/chat/completions", post(handle)).with_state(mock.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (mock, format!("http://{addr}/v1/chat/completions"))
}

fn config(endpoint: &str, key_env: Option<&str>) -> ProviderConfig {
    ProviderConfig {
        kind: ProviderKind::Remote,
        endpoint: Some(endpoint.into()),
        model: Some("example-model".into()),
        api_key_env: key_env.map(str::to_owned),
        timeout_ms: 500,
        max_retries: 2,
    }
}

fn input() -> DriftInput {
    DriftInput {
        code_name: "Process".into(),
        code_definition: "Review steps.".into(),
        exemplars: vec!["three review committees".into()],
        candidate: "the budget was cut".into(),
        context: "ctx".into(),
    }
}

#[tokio::test]
async fn request_carries_prompt_schema_and_credential() {
    let ok = r#"{"drift_detected":true,"explanation":"Funding, not process.","suggested_definition":"Process and funding."}"#;
    let (mock, url) = serve(vec![(StatusCode::OK, chat(ok), 0)]).await;
    std::env::set_var("RTA_TEST_KEY_A", "sk-test-123");
    let c = config(&url, Some("RTA_TEST_KEY_A"));
    let assistant = Assistant::new(build_provider(&c).unwrap(), c.max_retries);
    let a = assistant.detect_drift(input()).await.unwrap();
    assert!(a.drift_detected);
    let seen = mock.seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    let (headers, body) = &seen[0];
    assert_eq!(headers["authorization"], "Bearer sk-test-123");
    assert!(headers.contains_key("x-request-id"));
    assert_eq!(body["model"], "example-model");
    assert_eq!(body["messages"][0]["role"], "system");
    assert!(body["messages"][0]["content"].as_str().unwrap().contains("spot 'conceptual drift'"));
    assert!(body["messages"][1]["content"].as_str().unwrap().contains("Current definition: Review steps."));
    assert_eq!(&body["response_format"], rta_assist::templates::response_format(Feature::Drift));
    assert_eq!(body["response_format"]["json_schema"]["name"], "conceptual_drift");
}

#[tokio::test]
async fn missing_field_fails_after_retries() {
    let bad = r#"{"drift_detected":true}"#;
    let (mock, url) = serve(vec![(StatusCode::OK, chat(bad), 0)]).await;
    let c = config(&url, None);
    let assistant = Assistant::new(build_provider(&c).unwrap(), c.max_retries);
    let err = assistant.detect_drift(input()).await.unwrap_err();
    assert!(matches!(err, AssistError::SchemaViolation { attempts: 3, last: SchemaError::Shape(_) }), "{err:?}");
    assert_eq!(mock.seen.lock().unwrap().len(), 3);
    assert!(!mock.seen.lock().unwrap()[0].0.contains_key("authorization"));
}

#[tokio::test]
async fn retry_recovers_from_one_bad_reply() {
    let good = r#"{"drift_detected":false,"explanation":"Consistent.","suggested_definition":null}"#;
    let (mock, url) = serve(vec![
        (StatusCode::OK, chat("not json at all"), 0),
        (StatusCode::OK, json!({"choices": []}), 0),
        (StatusCode::OK, chat(good), 0),
    ])
    .await;
    let c = config(&url, None);
    let assistant = Assistant::new(build_provider(&c).unwrap(), 2);
    let a = assistant.detect_drift(input()).await.unwrap();
    assert!(!a.drift_detected);
    assert_eq!(mock.seen.lock().unwrap().len(), 3);
}

#[tokio::test]
async fn http_errors_and_timeouts_surface() {
    let (_, url) = serve(vec![(StatusCode::INTERNAL_SERVER_ERROR, json!({}), 0)]).await;
    let c = config(&url, None);
    let err = Assistant::new(build_provider(&c).unwrap(), 2).detect_drift(input()).await.unwrap_err();
    assert_eq!(err, AssistError::Provider(ProviderError::Status(500)));

    let (_, url) = serve(vec![(StatusCode::OK, chat("{}"), 2_000)]).await;
    let c = config(&url, None);
    let err = Assistant::new(build_provider(&c).unwrap(), 2).detect_drift(input()).await.unwrap_err();
    assert_eq!(err, AssistError::Provider(ProviderError::Timeout));
}

#[tokio::test]
async fn missing_credential_variable() {
    let (mock, url) = serve(vec![(StatusCode::OK, chat("{}"), 0)]).await;
    let c = config(&url, Some("RTA_TEST_KEY_SURELY_UNSET"));
    let err = Assistant::new(build_provider(&c).unwrap(), 2).detect_drift(input()).await.unwrap_err();
    assert_eq!(err, AssistError::Provider(ProviderError::MissingCredential("RTA_TEST_KEY_SURELY_UNSET".into())));
    assert!(mock.seen.lock().unwrap().is_empty());
}

#[test]
fn remote_needs_a_valid_endpoint() {
    let mut c = config("not a url", None);
    assert!(matches!(build_provider(&c), Err(ProviderError::Config(_))));
    c.endpoint = None;
    assert!(matches!(build_provider(&c), Err(ProviderError::Config(_))));
    let s = ProviderConfig::default();
    assert_eq!(build_provider(&s).unwrap().kind(), ProviderKind::Stub);
}
