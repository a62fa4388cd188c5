mod support;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use support::{fake_jpeg, serve_mock};
use uuid::Uuid;
use wayfinder_core::compose::{compose, HttpRewriter, Rewriter};
use wayfinder_core::interpret::{ImageDims, Interpreter, NavCue};
use wayfinder_core::perception::east::{CellGeometry, EastTensors};
use wayfinder_core::perception::{
    analyze_with_timeout, BackendError, CostLedger, EastBackend, EastSource, PerceptionBackend, RemoteBackend,
    VqaBackend, VqaClient, EXIT_SIGN_QUESTION,
};
use wayfinder_core::{Direction, Frame, SignClass, Units};

const DIMS: ImageDims = ImageDims {
    width: 640,
    height: 480,
};

fn frame(seq: u64) -> Frame {
    Frame::new(Uuid::new_v4(), seq, seq * 100, fake_jpeg(seq as u8))
}

fn contains(haystack: &[u8], needle: &str) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle.as_bytes())
}

async fn vqa_mock(body: Bytes) -> Json<Value> {
    let yes = contains(&body, EXIT_SIGN_QUESTION);
    Json(json!({"answer": if yes { "yes" } else { "no" }, "confidence": 0.92}))
}

#[tokio::test]
async fn vqa_exit_answer_becomes_an_exit_cue() {
    let base = serve_mock(Router::new().route("/v1/vqa", post(vqa_mock))).await;
    let backend = VqaBackend::new(VqaClient::new(&base, Duration::from_secs(2)));
    let questions = vec![EXIT_SIGN_QUESTION.to_string(), "Is this a stairs sign?".to_string()];
    let obs = analyze_with_timeout(&backend, &frame(1), &questions, Duration::from_secs(2))
        .await
        .unwrap();
    assert_eq!(obs.vqa_answers.len(), 2);
    assert_eq!(obs.vqa_answers[0].answer, "yes");
    assert_eq!(obs.vqa_answers[1].answer, "no");

    let cues = Interpreter::default().interpret(&obs, DIMS);
    assert_eq!(cues.len(), 1);
    assert_eq!(cues[0].sign_class, SignClass::ExitDoor);
    assert_eq!(cues[0].direction, Direction::Ahead);
    assert_eq!(cues[0].distance_m, None);
}

#[tokio::test]
async fn vqa_failures_map_to_error_codes() {
    let router = Router::new()
        .route(
            "/a/v1/vqa",
            post(|| async { Json(json!({"answer": "yes", "confidence": 1.5})) }),
        )
        .route("/b/v1/vqa", post(|| async { StatusCode::SERVICE_UNAVAILABLE }))
        .route(
            "/c/v1/vqa",
            post(|| async {
                tokio::time::sleep(Duration::from_millis(500)).await;
                Json(json!({"answer": "yes", "confidence": 0.5}))
            }),
        );
    let base = serve_mock(router).await;
    let q = vec![EXIT_SIGN_QUESTION.to_string()];
    let ask = |path: &str| VqaBackend::new(VqaClient::new(format!("{base}/{path}"), Duration::from_secs(5)));

    let e = analyze_with_timeout(&ask("a"), &frame(1), &q, Duration::from_secs(2))
        .await
        .unwrap_err();
    assert_eq!(e.code(), "backend_protocol");
    assert!(!e.retryable());
    let e = analyze_with_timeout(&ask("b"), &frame(1), &q, Duration::from_secs(2))
        .await
        .unwrap_err();
    assert_eq!(e.code(), "backend_unavailable");
    let started = Instant::now();
    let e = analyze_with_timeout(&ask("c"), &frame(1), &q, Duration::from_millis(100))
        .await
        .unwrap_err();
    assert_eq!(e.code(), "backend_timeout");
    assert!(started.elapsed() < Duration::from_millis(450));
}

fn remote_reply(n: usize) -> (StatusCode, String) {
    match n % 5 {
        3 => (StatusCode::INTERNAL_SERVER_ERROR, "oops".into()),
        4 => (StatusCode::OK, "{not json".into()),
        _ => (
            StatusCode::OK,
            json!({
                "text_regions": [{"text": "EXIT", "confidence": 0.9,
                                  "quad": [[480, 150], [600, 150], [600, 200], [480, 200]]}],
                "labels": [{"label": "person", "confidence": 0.8}]
            })
            .to_string(),
        ),
    }
}

#[tokio::test]
async fn remote_bills_only_validated_replies() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let router = Router::new().route(
        "/analyze",
        post(move |headers: HeaderMap, body: Bytes| {
            let calls = seen.clone();
            async move {
                assert_eq!(headers["authorization"], "Bearer k-123");
                assert_eq!(headers["content-type"], "image/jpeg");
                assert!(body.starts_with(&[0xFF, 0xD8]));
                remote_reply(calls.fetch_add(1, Ordering::SeqCst))
            }
        }),
    );
    let base = serve_mock(router).await;
    let ledger = Arc::new(CostLedger::default());
    let backend = RemoteBackend::new(
        format!("{base}/analyze"),
        "k-123",
        Duration::from_secs(2),
        ledger.clone(),
    );

    let mut codes = Vec::new();
    for seq in 1..=5 {
        match backend.analyze(&frame(seq), &[]).await {
            Ok(obs) => {
                assert_eq!(obs.text_regions[0].text.as_deref(), Some("EXIT"));
                let cues = Interpreter::default().interpret(&obs, DIMS);
                assert!(cues
                    .iter()
                    .any(|c| c.sign_class == SignClass::ExitDoor && c.direction == Direction::Right));
                assert!(cues.iter().any(|c| c.sign_class == SignClass::Obstacle));
                codes.push("ok");
            }
            Err(e) => codes.push(e.code()),
        }
    }
    assert_eq!(codes, ["ok", "ok", "ok", "backend_unavailable", "backend_protocol"]);
    assert_eq!(ledger.images_processed(), 3);
    assert_eq!(ledger.total_usd().to_string(), "0.003");
}

#[tokio::test]
async fn remote_reply_failing_validation_is_not_billed() {
    let router = Router::new().route(
        "/analyze",
        post(|| async {
            Json(json!({"text_regions": [{"text": "EXIT", "confidence": 2.0,
                                          "quad": [[0, 0], [1, 0], [1, 1], [0, 1]]}]}))
        }),
    );
    let base = serve_mock(router).await;
    let ledger = Arc::new(CostLedger::default());
    let backend = RemoteBackend::new(format!("{base}/analyze"), "k", Duration::from_secs(2), ledger.clone());
    let e = backend.analyze(&frame(1), &[]).await.unwrap_err();
    assert!(matches!(e, BackendError::Protocol(_)));
    assert_eq!(ledger.images_processed(), 0);
}

fn two_overlapping_cells() -> EastTensors {
    let mut t = EastTensors::zeros(4, 4, 4);
    let g = CellGeometry {
        d_top: 5.0,
        d_right: 20.0,
        d_bottom: 5.0,
        d_left: 20.0,
        theta: 0.0,
    };
    t.set_cell(1, 1, 0.9, g);
    t.set_cell(2, 1, 0.85, g);
    t
}

#[tokio::test]
async fn east_sidecar_tensors_are_decoded_and_suppressed() {
    let router = Router::new().route(
        "/v1/east",
        post(|body: Bytes| async move {
            assert!(contains(&body, "name=\"image\""));
            Json(serde_json::to_value(two_overlapping_cells()).unwrap())
        }),
    );
    let base = serve_mock(router).await;
    let backend = EastBackend::new(EastSource::Sidecar { base_url: base }, Duration::from_secs(2), 0.8, 0.2);
    let obs = backend.analyze(&frame(1), &[]).await.unwrap();
    assert_eq!(obs.text_regions.len(), 1);
    assert_eq!(obs.text_regions[0].score, 1.0);
    assert!(obs.text_regions[0].text.is_none());
}

#[tokio::test]
async fn east_fixtures_and_vqa_combine() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("0001.json"),
        serde_json::to_vec(&two_overlapping_cells()).unwrap(),
    )
    .unwrap();
    std::fs::write(dir.path().join("0003.json"), b"{\"h\": 1}").unwrap();
    let base = serve_mock(Router::new().route("/v1/vqa", post(vqa_mock))).await;
    let backend = EastBackend::new(
        EastSource::Fixtures {
            dir: dir.path().to_path_buf(),
        },
        Duration::from_secs(2),
        0.8,
        0.2,
    )
    .with_vqa(VqaClient::new(base, Duration::from_secs(2)));
    let q = vec![EXIT_SIGN_QUESTION.to_string()];

    let obs = backend.analyze(&frame(1), &q).await.unwrap();
    assert_eq!(obs.text_regions.len(), 1);
    let cues = Interpreter::default().interpret(&obs, DIMS);
    assert_eq!(cues.len(), 1);
    assert_eq!(cues[0].sign_class, SignClass::ExitDoor);
    // the box is centered at x = 6 in a 640-wide image
    assert_eq!(cues[0].direction, Direction::Left);

    let obs = backend.analyze(&frame(2), &q).await.unwrap();
    assert!(obs.text_regions.is_empty());
    assert_eq!(obs.vqa_answers.len(), 1);

    let e = backend.analyze(&frame(3), &q).await.unwrap_err();
    assert_eq!(e.code(), "backend_protocol");
}

#[tokio::test]
async fn rewriter_accepts_faithful_text_and_falls_back_otherwise() {
    let router = Router::new()
        .route(
            "/good/v1/rewrite",
            post(|Json(req): Json<Value>| async move {
                assert_eq!(req["facts"]["class"], "EXIT_DOOR");
                assert_eq!(req["facts"]["direction"], "right");
                Json(json!({"text": "Exit door on your right, 10 feet ahead."}))
            }),
        )
        .route(
            "/swap/v1/rewrite",
            post(|| async { Json(json!({"text": "Exit door on your left, 10 feet ahead."})) }),
        )
        .route("/junk/v1/rewrite", post(|| async { "<html>" }))
        .route(
            "/slow/v1/rewrite",
            post(|| async {
                tokio::time::sleep(Duration::from_millis(800)).await;
                Json(json!({"text": "Exit door on your right, 10 feet ahead."}))
            }),
        );
    let base = serve_mock(router).await;
    let template = compose(
        &[NavCue::new(SignClass::ExitDoor, Direction::Right, Some(3.05), 1.0)],
        Units::Feet,
        1,
    )
    .remove(0);
    assert_eq!(template.text, "There's an exit door 10 feet ahead on your right");
    let rewriter = |p: &str| HttpRewriter::new(&format!("{base}/{p}"), Duration::from_millis(300));

    let out = rewriter("good").rewrite(template.clone()).await;
    assert!(out.rewritten);
    assert_eq!(out.text, "Exit door on your right, 10 feet ahead.");

    for p in ["swap", "junk", "slow"] {
        let started = Instant::now();
        let out = rewriter(p).rewrite(template.clone()).await;
        assert!(!out.rewritten, "{p}");
        assert_eq!(out.text, template.text);
        assert!(started.elapsed() < Duration::from_millis(700), "{p}");
    }
}
