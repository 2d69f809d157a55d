//! Read-only HTTP JSON API over one loaded trace.
//!
//! The server holds a single immutable trace. Navigation is stateless: the
//! client owns the cursor and `/api/step` computes each transition, so any
//! number of clients can browse concurrently.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use otr_core::call_tree::{Child, EventOwner, FrameId};
use otr_core::export::to_chrome;
use otr_core::navigator::{
    function_location, location_at, outcome_view, stack, step, Location, OutcomeView, StackView, StepError,
    StepOp,
};
use otr_core::rendered::RenderedEvent;
use otr_core::wire::EventKind;
use otr_core::Trace;
use serde::Serialize;
use serde_json::json;
use tower_http::services::ServeDir;

pub const DEFAULT_PORT: u16 = 7381;

/// Error reply: a status code and a JSON `{"error": ...}` body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<StepError> for ApiError {
    fn from(e: StepError) -> Self {
        let status = match e {
            StepError::NoEnclosingFrame(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StepError::CursorOutOfRange { .. } => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Params = Query<HashMap<String, String>>;

fn param<'a>(q: &'a HashMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    q.get(key)
        .map(String::as_str)
        .ok_or_else(|| ApiError::bad_request(format!("missing query parameter {key:?}")))
}

fn index_param(q: &HashMap<String, String>, key: &str, default: Option<usize>) -> Result<usize, ApiError> {
    match (q.get(key), default) {
        (None, Some(d)) => Ok(d),
        _ => param(q, key)?
            .parse()
            .map_err(|_| ApiError::bad_request(format!("{key} must be a non-negative integer"))),
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub event_count: usize,
    pub top_frames: Vec<FrameId>,
    pub truncated_count: usize,
    /// The stream stopped inside an event that was dropped.
    pub partial_event: bool,
}

#[derive(Debug, Serialize)]
pub struct FrameView {
    pub id: FrameId,
    pub name: String,
    pub parent: Option<FrameId>,
    pub depth: usize,
    pub args: Vec<String>,
    pub outcome: OutcomeView,
    pub children: Vec<FrameId>,
    /// Event indices of match nodes directly inside the frame.
    pub matches: Vec<usize>,
    /// First and closing event index; the end is null when truncated.
    pub event_range: (usize, Option<usize>),
    pub ts_range: (u64, Option<u64>),
    pub location: Location,
}

#[derive(Debug, Serialize)]
pub struct EventView {
    pub idx: usize,
    pub ts: u64,
    pub kind: &'static str,
    /// Called function for calls, closed function for returns and raises.
    pub name: Option<String>,
    pub frame: Option<FrameId>,
    pub site: Option<u32>,
    pub values: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct StepReply {
    pub cursor: usize,
    pub stack: StackView,
    pub location: Option<Location>,
}

#[derive(Debug, Serialize)]
pub struct SearchReply {
    pub frames: Vec<FrameId>,
}

type Shared = Arc<Trace>;

async fn summary(State(t): State<Shared>) -> Json<Summary> {
    Json(Summary {
        event_count: t.forest.len(),
        top_frames: t.forest.roots().to_vec(),
        truncated_count: t.forest.truncated_count(),
        partial_event: t.truncation.partial_event,
    })
}

async fn frame(State(t): State<Shared>, Path(id): Path<String>) -> ApiResult<FrameView> {
    let id: u32 = id
        .parse()
        .map_err(|_| ApiError::bad_request("frame id must be a non-negative integer"))?;
    let f = t
        .forest
        .frame(FrameId(id))
        .ok_or_else(|| ApiError::not_found(format!("no frame {id}")))?;
    Ok(Json(FrameView {
        id: f.id,
        name: t.fn_name(f.fn_id).to_string(),
        parent: f.parent,
        depth: f.depth,
        args: t
            .rendered
            .call_args(f.begin_event)
            .iter()
            .map(|a| a.text.clone())
            .collect(),
        outcome: outcome_view(&t, f),
        children: f.child_frames().collect(),
        matches: f
            .children
            .iter()
            .filter_map(|c| match c {
                Child::Match(m) => Some(t.forest.match_node(*m).event_idx),
                Child::Frame(_) => None,
            })
            .collect(),
        event_range: (f.begin_event, f.end_event),
        ts_range: (f.begin_ts, f.end_ts),
        location: function_location(&t, f),
    }))
}

fn event_view(t: &Trace, idx: usize) -> EventView {
    let ev = &t.forest.events()[idx];
    let frame = match t.forest.owner(idx) {
        Some(EventOwner::Open(f) | EventOwner::Close(f)) => Some(f),
        Some(EventOwner::Match(m)) => Some(t.forest.match_node(m).frame),
        None => None,
    };
    let name = match ev.kind {
        EventKind::Match { .. } => None,
        _ => frame
            .and_then(|f| t.forest.frame(f))
            .map(|f| t.fn_name(f.fn_id).to_string()),
    };
    let site = match ev.kind {
        EventKind::Match { site_id, .. } => Some(site_id.0),
        _ => None,
    };
    let values = match t.rendered.event(idx) {
        RenderedEvent::Call { args } => args.iter().map(|a| a.text.clone()).collect(),
        RenderedEvent::Return { value: v }
        | RenderedEvent::Raise { exn: v }
        | RenderedEvent::Match { discriminee: v } => {
            vec![v.text.clone()]
        }
    };
    EventView {
        idx,
        ts: ev.ts,
        kind: ev.kind_name(),
        name,
        frame,
        site,
        values,
    }
}

async fn events(State(t): State<Shared>, Query(q): Params) -> ApiResult<serde_json::Value> {
    let n = t.forest.len();
    let from = index_param(&q, "from", Some(0))?;
    let to = index_param(&q, "to", Some(n))?;
    if from > to {
        return Err(ApiError::bad_request(format!("from {from} is after to {to}")));
    }
    let events: Vec<EventView> = (from.min(n)..to.min(n)).map(|i| event_view(&t, i)).collect();
    Ok(Json(json!({ "events": events })))
}

async fn step_handler(State(t): State<Shared>, Query(q): Params) -> ApiResult<StepReply> {
    let at = index_param(&q, "at", None)?;
    let op: StepOp = param(&q, "op")?.parse().map_err(ApiError::bad_request)?;
    let cursor = step(&t.forest, at, op)?;
    Ok(Json(StepReply {
        cursor,
        stack: stack(&t, cursor)?,
        location: location_at(&t, cursor),
    }))
}

async fn search(State(t): State<Shared>, Query(q): Params) -> ApiResult<SearchReply> {
    let name = param(&q, "fn")?;
    let frames = t
        .find_calls(name)
        .map_err(|e| ApiError::not_found(e.to_string()))?;
    Ok(Json(SearchReply {
        frames: frames.iter().map(|f| f.id).collect(),
    }))
}

async fn chrome(State(t): State<Shared>, Query(q): Params) -> Result<Response, ApiError> {
    let logical = match q.get("logical").map(String::as_str) {
        None | Some("false" | "0") => false,
        Some("true" | "1") => true,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "logical must be true or false, not {other:?}"
            )))
        }
    };
    Ok(Json(to_chrome(&t, logical)).into_response())
}

async fn unknown_api() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// The API router. With `assets`, other paths are served from that
/// directory, which is where a browser front end is installed.
pub fn router(trace: Trace, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/summary", get(summary))
        .route("/frames/{id}", get(frame))
        .route("/events", get(events))
        .route("/step", get(step_handler))
        .route("/search", get(search))
        .route("/export/chrome", get(chrome))
        .fallback(unknown_api);
    let app = Router::new().nest("/api", api).with_state(Arc::new(trace));
    match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves on an already bound listener until interrupted.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    trace: Trace,
    assets: Option<PathBuf>,
) -> std::io::Result<()> {
    axum::serve(listener, router(trace, assets))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(trace: Trace, addr: SocketAddr, assets: Option<PathBuf>) -> std::io::Result<()> {
    serve_on(tokio::net::TcpListener::bind(addr).await?, trace, assets).await
}
