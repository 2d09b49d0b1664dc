//! HTTP JSON interface to the rankdesign library.
//!
//! All endpoints take `POST` with an `application/json` body:
//! `/v1/convert`, `/v1/design`, `/v1/cluster-size`, `/v1/deff`,
//! `/v1/sweep` and `/v1/simulate`. Status codes: 400 malformed JSON, 415
//! wrong content type, 422 invalid fields, 409 infeasible design, 413
//! replication cap exceeded.

mod api;
mod error;

use std::sync::Arc;

use axum::routing::post;
use axum::Router;
use tower_http::cors::CorsLayer;

pub use error::ApiError;

pub const DEFAULT_MAX_REPLICATIONS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub max_replications: usize,
    /// Simulation threads shared by all requests; 0 uses one per core.
    pub workers: usize,
    pub permissive_cors: bool,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            max_replications: DEFAULT_MAX_REPLICATIONS,
            workers: 0,
            permissive_cors: false,
        }
    }
}

#[derive(Clone)]
pub(crate) struct AppState {
    max_replications: usize,
    pool: Arc<rayon::ThreadPool>,
}

pub fn app(config: &AppConfig) -> Result<Router, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .thread_name(|i| format!("rankdesign-sim-{i}"))
        .build()?;
    let state = AppState {
        max_replications: config.max_replications,
        pool: Arc::new(pool),
    };
    let router = Router::new()
        .route("/v1/convert", post(api::convert))
        .route("/v1/design", post(api::design))
        .route("/v1/cluster-size", post(api::cluster_size_handler))
        .route("/v1/deff", post(api::deff))
        .route("/v1/sweep", post(api::sweep))
        .route("/v1/simulate", post(api::simulate))
        .with_state(state);
    Ok(if config.permissive_cors {
        router.layer(CorsLayer::permissive())
    } else {
        router
    })
}
