//! HTTP resolve service. It only checks; execution stays on the platform.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use resolvit_core::repository::{RepositoryClient, RepositorySource};

use crate::engine::{
    check_request, refresh_all, Failure, EXIT_CONFLICT, EXIT_NO_SOLUTION, EXIT_REPOSITORY,
};
use crate::payload::{encode_failure, encode_outcome, parse_request, CONTENT_TYPE};

pub struct ResolveService {
    repositories: Vec<RepositorySource>,
    client: RepositoryClient,
}

impl ResolveService {
    pub fn new(repositories: Vec<RepositorySource>, client: RepositoryClient) -> Self {
        ResolveService {
            repositories,
            client,
        }
    }

    pub fn client(&self) -> &RepositoryClient {
        &self.client
    }

    /// Handles one request body; returns the HTTP status and response body.
    pub fn resolve(&self, body: &str) -> (u16, String) {
        let req = match parse_request(body) {
            Ok(r) => r,
            Err(reason) => {
                return (
                    400,
                    encode_failure(&Failure::usage(format!("malformed payload: {reason}"))),
                )
            }
        };
        let outcome = refresh_all(&self.client, &self.repositories)
            .and_then(|(snapshots, _)| check_request(&req, &snapshots, &self.client));
        match outcome {
            Ok(o) => (200, encode_outcome(&o)),
            Err(f) => (http_status(&f), encode_failure(&f)),
        }
    }
}

fn http_status(f: &Failure) -> u16 {
    match f.code {
        EXIT_NO_SOLUTION | EXIT_CONFLICT => 422,
        EXIT_REPOSITORY => 502,
        _ => 400,
    }
}

pub fn router(service: Arc<ResolveService>) -> Router {
    Router::new()
        .route("/v1/health", get(|| async { "ok\n" }))
        .route("/v1/resolve", post(resolve))
        .with_state(service)
}

async fn resolve(State(service): State<Arc<ResolveService>>, body: String) -> impl IntoResponse {
    let (code, text) = tokio::task::spawn_blocking(move || service.resolve(&body))
        .await
        .unwrap_or_else(|e| (500, format!("Status: internal-error\nError: {e}\n\n")));
    (
        StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
        [(header::CONTENT_TYPE, CONTENT_TYPE)],
        text,
    )
}

/// Serves on `listener` until the process ends.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<ResolveService>,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

/// Binds `addr` and serves from a background thread. Returns the bound
/// address, which differs from `addr` when its port is 0.
pub fn spawn(addr: SocketAddr, service: ResolveService) -> std::io::Result<SocketAddr> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
    let bound = listener.local_addr()?;
    std::thread::spawn(move || runtime.block_on(serve(listener, Arc::new(service))));
    Ok(bound)
}
