//! HTTP front end of [`SessionStore`].
//!
//! ```text
//! GET  /images                   [{"id": .., "status": "pending"|"done"}]
//! GET  /images/{id}?scale=k      PNG, k in 1..=8 (default 1)
//! GET  /images/{id}/mask         stored mask PNG
//! PUT  /images/{id}/mask         grayscale PNG body
//! GET  /images/{id}/clicks       click log text
//! POST /images/{id}/clicks       "t x y tool button" lines
//! POST /export?dir=PATH          {"count": n, "dir": ..}; dir defaults to <store>/export
//! ```

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::store::{parse_clicks, AnnotateError, ImageStatus, SessionStore};

type Shared = Arc<SessionStore>;

impl IntoResponse for AnnotateError {
    fn into_response(self) -> Response {
        let status = match &self {
            AnnotateError::UnknownId(_) => StatusCode::NOT_FOUND,
            AnnotateError::BadScale(_) | AnnotateError::MalformedStream(_) | AnnotateError::BadClick(_) => {
                StatusCode::BAD_REQUEST
            }
            AnnotateError::DimensionMismatch { .. } | AnnotateError::InvalidExample { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            AnnotateError::TimestampRegression { .. } | AnnotateError::NothingToExport => StatusCode::CONFLICT,
            AnnotateError::StoreUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            AnnotateError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, self.to_string()).into_response()
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, AnnotateError> + Send + 'static,
) -> Result<T, AnnotateError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(AnnotateError::StoreUnavailable(e.to_string())))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

#[derive(Serialize)]
struct Listing {
    id: String,
    status: ImageStatus,
}

async fn list(State(store): State<Shared>) -> Result<Json<Vec<Listing>>, AnnotateError> {
    let items = blocking(move || store.list_images()).await?;
    Ok(Json(items.into_iter().map(|(id, status)| Listing { id, status }).collect()))
}

#[derive(Deserialize)]
struct ScaleQuery {
    scale: Option<u32>,
}

async fn image(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ScaleQuery>,
) -> Result<Response, AnnotateError> {
    let scale = q.scale.unwrap_or(1);
    Ok(png(blocking(move || store.get_image(&id, scale)).await?))
}

async fn get_mask(State(store): State<Shared>, Path(id): Path<String>) -> Result<Response, AnnotateError> {
    match blocking(move || store.get_mask(&id)).await? {
        Some(bytes) => Ok(png(bytes)),
        None => Ok((StatusCode::NOT_FOUND, "no mask submitted").into_response()),
    }
}

async fn put_mask(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<StatusCode, AnnotateError> {
    blocking(move || store.put_mask(&id, &body)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_clicks(State(store): State<Shared>, Path(id): Path<String>) -> Result<String, AnnotateError> {
    let clicks = blocking(move || store.clicks(&id)).await?;
    Ok(clicks.iter().map(|c| format!("{c}\n")).collect())
}

async fn post_clicks(State(store): State<Shared>, Path(id): Path<String>, body: String) -> Result<StatusCode, AnnotateError> {
    let batch = parse_clicks(&body)?;
    blocking(move || store.append_clicks(&id, &batch)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct ExportQuery {
    dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct ExportResult {
    count: usize,
    dir: PathBuf,
}

async fn export(State(store): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Json<ExportResult>, AnnotateError> {
    let dir = q.dir.unwrap_or_else(|| store.root().join("export"));
    let out = dir.clone();
    let count = blocking(move || store.export(&out)).await?;
    Ok(Json(ExportResult { count, dir }))
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/images", get(list))
        .route("/images/{id}", get(image))
        .route("/images/{id}/mask", get(get_mask).put(put_mask))
        .route("/images/{id}/clicks", get(get_clicks).post(post_clicks))
        .route("/export", axum::routing::post(export))
        .with_state(store)
}

/// Serves `store` on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, store: SessionStore) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(store))).await
}
