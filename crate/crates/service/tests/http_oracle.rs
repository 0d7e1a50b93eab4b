use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use curatekit::pipeline::{BoxOracle, LabelOracle, MaskOracle, OracleError, OracleImage};
use curatekit::BBox;
use curatekit_service::oracles::HttpOracle;

/// Status codes to answer with, in order; after the script runs out every
/// call succeeds.
#[derive(Clone, Default)]
struct Script {
    fail_with: Vec<u16>,
    delay: Option<Duration>,
    calls: Arc<AtomicUsize>,
    bodies: Arc<std::sync::Mutex<Vec<Value>>>,
}

async fn reply(
    State(s): State<Script>,
    uri: axum::http::Uri,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    let n = s.calls.fetch_add(1, Ordering::SeqCst);
    s.bodies.lock().unwrap().push(body);
    if let Some(d) = s.delay {
        tokio::time::sleep(d).await;
    }
    if let Some(code) = s.fail_with.get(n) {
        return (
            StatusCode::from_u16(*code).unwrap(),
            Json(json!({"error": "scripted"})),
        );
    }
    let v = match uri.path() {
        "/label" => json!({"label": "shoe"}),
        "/boxes" => json!({"boxes": [{"bbox": [1.0, 2.0, 3.0, 4.0], "score": 0.75}]}),
        _ => json!({"mask": {"size": [2, 2], "counts": [1, 2, 1]}}),
    };
    (StatusCode::OK, Json(v))
}

fn spawn(script: Script) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/label", post(reply))
                .route("/boxes", post(reply))
                .route("/mask", post(reply))
                .with_state(script);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn client(addr: SocketAddr, timeout: Duration) -> HttpOracle {
    HttpOracle::with_policy(
        &format!("http://{addr}/"),
        timeout,
        3,
        Duration::from_millis(10),
    )
}

#[test]
fn transient_errors_are_retried() {
    let s = Script {
        fail_with: vec![503, 429],
        ..Script::default()
    };
    let addr = spawn(s.clone());
    let got = client(addr, Duration::from_secs(5))
        .label("red sneakers")
        .unwrap();
    assert_eq!(got.as_deref(), Some("shoe"));
    assert_eq!(s.calls.load(Ordering::SeqCst), 3);
    assert_eq!(
        s.bodies.lock().unwrap()[2],
        json!({"description": "red sneakers"})
    );
}

#[test]
fn gives_up_after_three_attempts() {
    let s = Script {
        fail_with: vec![500; 10],
        ..Script::default()
    };
    let addr = spawn(s.clone());
    let err = client(addr, Duration::from_secs(5)).label("x").unwrap_err();
    assert!(
        matches!(err, OracleError::Failed(ref m) if m.contains("500")),
        "{err:?}"
    );
    assert_eq!(s.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let s = Script {
        fail_with: vec![400; 10],
        ..Script::default()
    };
    let addr = spawn(s.clone());
    assert!(client(addr, Duration::from_secs(5)).label("x").is_err());
    assert_eq!(s.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn slow_service_times_out() {
    let s = Script {
        delay: Some(Duration::from_millis(500)),
        ..Script::default()
    };
    let addr = spawn(s.clone());
    let err = client(addr, Duration::from_millis(100))
        .label("x")
        .unwrap_err();
    assert_eq!(err, OracleError::Timeout);
    assert_eq!(s.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn boxes_and_masks_send_the_image() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.png");
    std::fs::write(&file, b"not really a png").unwrap();
    let s = Script::default();
    let addr = spawn(s.clone());
    let c = client(addr, Duration::from_secs(5));
    let img = OracleImage {
        key: "shop/a.png",
        file: &file,
        width: 2,
        height: 2,
    };
    let boxes = c.boxes(&img, "a shoe").unwrap();
    assert_eq!(boxes.len(), 1);
    assert_eq!(boxes[0].bbox, BBox::new(1.0, 2.0, 3.0, 4.0));
    let mask = c.mask(&img, &BBox::new(0.0, 0.0, 2.0, 2.0)).unwrap();
    assert_eq!(mask.counts, vec![1, 2, 1]);

    let bodies = s.bodies.lock().unwrap();
    let expected: HashMap<&str, Value> = [
        ("image", json!("bm90IHJlYWxseSBhIHBuZw==")),
        ("path", json!("shop/a.png")),
    ]
    .into_iter()
    .collect();
    for b in bodies.iter() {
        for (k, v) in &expected {
            assert_eq!(&b[*k], v);
        }
    }
    assert_eq!(bodies[0]["prompt"], "a shoe");
    assert_eq!(bodies[1]["bbox"], json!([0.0, 0.0, 2.0, 2.0]));
}
