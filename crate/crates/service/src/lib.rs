//! Wall hosting service.
//!
//! Every post runs through preprocess, classify and decide. Flagged posts
//! wait in a review queue for the manager; published ones appear on the
//! wall. All state changes are appended to an event log in the data
//! directory and the in-memory state is rebuilt from it on start.

pub mod config;
pub mod domain;
pub mod error;
pub mod events;
pub mod http;
pub mod moderator;
pub mod state;

pub use config::ServiceConfig;
pub use error::ServiceError;
pub use moderator::Moderator;

use std::sync::Arc;

/// Opens the moderator from `config` and serves HTTP until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let listen = config.listen.clone();
    let token = config.manager_token.clone();
    let moderator = Arc::new(Moderator::open(config)?);
    let app = http::router(moderator, token);
    let listener = tokio::net::TcpListener::bind(&listen)
        .await
        .map_err(|e| ServiceError::io(format!("bind {listen}"), e))?;
    log::info!("listening on {}", listener.local_addr().map_err(|e| ServiceError::io("local_addr", e))?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::io("serve", e))
}
