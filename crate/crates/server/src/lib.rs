//! HTTP service that runs lineup evaluation studies.
//!
//! Participants fetch lineups and submit evaluations; analysts create
//! studies, read visual test results and export the evaluation log. Study
//! state lives in append-only JSON-lines files under the data directory and
//! is replayed on startup.

mod config;
mod error;
mod routes;
mod study;

pub use config::ServerConfig;
pub use error::ApiError;
pub use routes::{router, AppState};
pub use study::{
    Assignment, BundleRef, LineupResult, NextResponse, Progress, Study, StudyData, StudyLineup, StudyRequest,
    StudyState, Submission, ASSIGNMENTS_FILE, EVALUATIONS_FILE, STUDY_FILE,
};

/// Binds, prints `listening on http://ADDR` and serves until Ctrl-C.
pub async fn serve(config: ServerConfig) -> Result<(), ApiError> {
    let addr = config.addr()?;
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(ApiError::io)?;
    let local = listener.local_addr().map_err(ApiError::io)?;
    println!("listening on http://{local}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ApiError::io)
}
