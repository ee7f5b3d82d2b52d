//! HTTP front end for the studio.
//!
//! Handlers are stateless: each request parses its own body and runs the
//! shared builders on the blocking pool. Bad input answers 400 and solver or
//! sampler breakdowns answer 422, both with `{"error": "..."}`.

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::Query;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tower_http::services::ServeDir;

use centralpath::compose::{self, SamplerSpec, SceneSpec};
use centralpath::geometry::LeafSpec;
use centralpath::model::ProblemFile;
use centralpath::svg::SvgOptions;

use crate::commands::{self, MeshParams};
use crate::error::CliError;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        let status = if e.is_numeric() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::BAD_REQUEST
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

fn bad_request(message: String) -> ApiError {
    ApiError {
        status: StatusCode::BAD_REQUEST,
        message,
    }
}

// axum's Json extractor answers 422 on schema mismatch, which would collide
// with the numeric-failure status, so bodies are decoded here instead.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, CliError> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        }),
    }
}

/// Problem JSON with an optional `sampler` override block.
#[derive(Deserialize)]
struct TraceRequest {
    #[serde(flatten)]
    problem: ProblemFile,
    #[serde(default)]
    sampler: SamplerSpec,
}

async fn trace(body: Bytes) -> Result<Response, ApiError> {
    let req: TraceRequest = parse(&body)?;
    let file = blocking(move || commands::trace(&req.problem, &req.sampler)).await?;
    Ok(Json(file).into_response())
}

async fn scene_preview(body: Bytes) -> Result<Response, ApiError> {
    let spec: SceneSpec = parse(&body)?;
    let svg = blocking(move || commands::render_scene(&spec, &SvgOptions::default())).await?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

async fn leaves(body: Bytes) -> Result<Response, ApiError> {
    let spec: LeafSpec = parse(&body)?;
    let file = blocking(move || commands::leaves(&spec)).await?;
    Ok(Json(file).into_response())
}

async fn presets() -> Response {
    Json(compose::presets()).into_response()
}

async fn mesh(query: Result<Query<MeshParams>, QueryRejection>, body: Bytes) -> Result<Response, ApiError> {
    let Query(params) = query.map_err(|e| bad_request(e.body_text()))?;
    let spec: SceneSpec = parse(&body)?;
    let stl = blocking(move || commands::mesh_scene(&spec, &params)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "model/stl"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"scene.stl\""),
        ],
        stl,
    )
        .into_response())
}

async fn health() -> &'static str {
    "ok"
}

/// API routes, with the static studio bundle as fallback when given.
pub fn router(static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/trace", post(trace))
        .route("/api/scene/preview", post(scene_preview))
        .route("/api/leaves", post(leaves))
        .route("/api/presets", get(presets))
        .route("/api/mesh", post(mesh));
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
