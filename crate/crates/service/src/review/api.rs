use std::io::Cursor;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use curatekit::datamodel::BBox;
use curatekit::geometry::rle_decode;
use curatekit::pipeline::{
    Candidate, CandidateId, FilterFlags, FlagReason, PipelineError, Verdict,
};

use super::{ReviewMode, ReviewService, Session};

/// Routes of the review API and the content files it links to.
pub fn router(service: ReviewService) -> Router {
    Router::new()
        .route("/api/queue/next", get(next_item))
        .route("/api/items/{id}", get(get_item))
        .route("/api/items/{id}/decision", post(post_decision))
        .route("/api/progress", get(progress))
        .route("/content/images/{id}", get(image_file))
        .route("/content/masks/{id}", get(mask_png))
        .with_state(service)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Serialize)]
struct ItemView {
    id: CandidateId,
    mode: ReviewMode,
    status: String,
    product_id: String,
    description: String,
    image_url: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bbox: Option<BBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask_url: Option<String>,
}

fn view(s: &Session, c: &Candidate) -> ItemView {
    let quality = s.mode == ReviewMode::Quality;
    ItemView {
        id: c.id.clone(),
        mode: s.mode,
        status: c.status.to_string(),
        product_id: c.product_id.clone(),
        description: c.description.clone(),
        image_url: format!("/content/images/{}", c.id),
        width: c.image.width,
        height: c.image.height,
        label: c.label.clone().filter(|_| quality),
        category: c
            .category
            .and_then(|id| s.ws.ontology().category(id))
            .map(|cat| cat.name.clone())
            .filter(|_| quality),
        bbox: c.boxes.first().map(|b| b.bbox).filter(|_| quality),
        mask_url: c
            .mask
            .as_ref()
            .map(|_| format!("/content/masks/{}", c.id))
            .filter(|_| quality),
    }
}

async fn next_item(State(svc): State<ReviewService>) -> Response {
    let s = svc.lock();
    let item =
        s.ws.candidates()
            .find(|c| s.mode.is_queued(c))
            .map(|c| view(&s, c));
    match item {
        Some(v) => Json(v).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn get_item(State(svc): State<ReviewService>, Path(id): Path<String>) -> Response {
    let s = svc.lock();
    let item = s.ws.get(&CandidateId(id)).map(|c| view(&s, c));
    match item {
        Some(v) => Json(v).into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown item"),
    }
}

async fn progress(State(svc): State<ReviewService>) -> Response {
    Json(svc.progress()).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    verdict: String,
    #[serde(default)]
    flags: Option<FilterFlags>,
    #[serde(default)]
    reason: Option<FlagReason>,
    #[serde(default)]
    idempotency_key: Option<String>,
    #[serde(default)]
    annotator: Option<String>,
}

/// A validated request body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Filter(FilterFlags),
    Review(Verdict),
}

/// Parses and validates a decision body the way the decision endpoint does.
pub fn decode_decision(mode: ReviewMode, body: &[u8]) -> Result<Decision, String> {
    let body: DecisionBody =
        serde_json::from_slice(body).map_err(|e| format!("malformed body: {e}"))?;
    parse_decision(mode, &body)
}

fn parse_decision(mode: ReviewMode, body: &DecisionBody) -> Result<Decision, String> {
    match (mode, body.verdict.as_str()) {
        (ReviewMode::Filter, "keep") => {
            let flags = body.flags.unwrap_or_default();
            if flags.any() || body.reason.is_some() {
                return Err("keep cannot carry exclusion flags or a reason".into());
            }
            Ok(Decision::Filter(flags))
        }
        (ReviewMode::Filter, "exclude") => match body.flags {
            Some(f) if f.any() && body.reason.is_none() => Ok(Decision::Filter(f)),
            _ => Err("exclude needs at least one flag set".into()),
        },
        (ReviewMode::Quality, "approve") => {
            if body.reason.is_some() || body.flags.is_some() {
                return Err("approve takes no reason or flags".into());
            }
            Ok(Decision::Review(Verdict::Approve))
        }
        (ReviewMode::Quality, "flag") => match (body.reason, body.flags) {
            (Some(r), None) => Ok(Decision::Review(Verdict::Flag(r))),
            _ => Err("flag needs a reason: bad_label, bad_box or bad_mask".into()),
        },
        (ReviewMode::Filter, v) => Err(format!("verdict {v:?} is not keep or exclude")),
        (ReviewMode::Quality, v) => Err(format!("verdict {v:?} is not approve or flag")),
    }
}

fn header_str(headers: &HeaderMap, name: &str) -> Option<String> {
    headers
        .get(name)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
        .filter(|s| !s.is_empty())
}

async fn post_decision(
    State(svc): State<ReviewService>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let id = CandidateId(id);
    let body: DecisionBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed body: {e}")),
    };
    let key = header_str(&headers, "idempotency-key").or_else(|| body.idempotency_key.clone());
    let actor = header_str(&headers, "x-annotator")
        .or_else(|| body.annotator.clone())
        .unwrap_or_else(|| "annotator".into());

    // The log append syncs to disk; keep it off the async workers.
    let res = tokio::task::spawn_blocking(move || decide(&svc, &id, &body, key, &actor)).await;
    match res {
        Ok(r) => r,
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn decide(
    svc: &ReviewService,
    id: &CandidateId,
    body: &DecisionBody,
    key: Option<String>,
    actor: &str,
) -> Response {
    let mut s = svc.lock();
    let mode = s.mode;
    let decision = match parse_decision(mode, body) {
        Ok(d) => d,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let Some(c) = s.ws.get(id) else {
        return error(StatusCode::NOT_FOUND, "unknown item");
    };
    if mode.is_decided(c) {
        // A retry carrying the key of the decision that settled the item gets
        // the original answer; everything else is a conflict.
        if key.is_some() && key == c.decision_key {
            return Json(json!({ "id": c.id, "status": c.status.to_string(), "repeated": true }))
                .into_response();
        }
        return (
            StatusCode::CONFLICT,
            Json(json!({ "error": "item already decided", "status": c.status.to_string() })),
        )
            .into_response();
    }
    if !mode.is_queued(c) {
        return (
            StatusCode::CONFLICT,
            Json(json!({ "error": format!("item is not in the {mode:?} queue"), "status": c.status.to_string() })),
        )
            .into_response();
    }
    let result = match decision {
        Decision::Filter(flags) => s.ws.record_filter(id, flags, actor, key),
        Decision::Review(v) => s.ws.record_review(id, v, actor, key),
    };
    match result {
        Ok(_) => {
            let status =
                s.ws.get(id)
                    .map(|c| c.status.to_string())
                    .unwrap_or_default();
            tracing::info!(item = %id, %status, actor, "decision recorded");
            Json(json!({ "id": id, "status": status, "repeated": false })).into_response()
        }
        Err(PipelineError::Conflict { status, .. }) => (
            StatusCode::CONFLICT,
            Json(json!({ "error": "item already decided", "status": status })),
        )
            .into_response(),
        Err(PipelineError::UnknownCandidate(_)) => error(StatusCode::NOT_FOUND, "unknown item"),
        Err(e) => {
            tracing::error!(item = %id, error = %e, "decision not recorded");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    }
}

fn content_type(path: &str) -> &'static str {
    let lower = path.to_ascii_lowercase();
    if lower.ends_with(".png") {
        "image/png"
    } else if lower.ends_with(".jpg") || lower.ends_with(".jpeg") {
        "image/jpeg"
    } else {
        "application/octet-stream"
    }
}

async fn image_file(State(svc): State<ReviewService>, Path(id): Path<String>) -> Response {
    let file = {
        let s = svc.lock();
        match s.ws.get(&CandidateId(id)) {
            Some(c) => (
                s.ws.image_root().join(&c.image.path),
                content_type(&c.image.path),
            ),
            None => return error(StatusCode::NOT_FOUND, "unknown item"),
        }
    };
    match tokio::fs::read(&file.0).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, file.1)], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "image file not found"),
    }
}

/// Grayscale PNG with foreground pixels white.
async fn mask_png(State(svc): State<ReviewService>, Path(id): Path<String>) -> Response {
    let mask = {
        let s = svc.lock();
        match s.ws.get(&CandidateId(id)) {
            Some(c) => c.mask.clone(),
            None => return error(StatusCode::NOT_FOUND, "unknown item"),
        }
    };
    let Some(rle) = mask else {
        return error(StatusCode::NOT_FOUND, "item has no mask");
    };
    let bits = match rle_decode(&rle) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let img = image::GrayImage::from_fn(bits.width(), bits.height(), |x, y| {
        image::Luma([if bits.get(x, y) { 255 } else { 0 }])
    });
    let mut out = Cursor::new(Vec::new());
    if let Err(e) = img.write_to(&mut out, image::ImageFormat::Png) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    ([(header::CONTENT_TYPE, "image/png")], out.into_inner()).into_response()
}
