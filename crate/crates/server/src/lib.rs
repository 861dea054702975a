//! REST facade over [`TrialStore`], served under `/api/v1`.
//!
//! Participant endpoints take the anonymous user or enrollment id as a
//! capability. Designer endpoints need `Authorization: Bearer <token>`.

mod error;
mod handlers;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Request, State};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post, put};
use axum::Router;
use chrono::{DateTime, Utc};
use studyu_store::{Clock, FileBackend, ManualClock, OsEntropy, StoreError, SystemClock, TrialStore};
use thiserror::Error;
use tokio::net::TcpListener;

pub use error::{status_for, ApiError};
pub use handlers::{ClockUpdate, EligibilityCheck, EligibilityStep, NewUser, PublishRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    pub researcher_token: String,
    /// Show reports before the minimum study length has passed.
    pub demo_unlock_reports: bool,
    /// Add the anonymous account id to CSV exports.
    pub export_include_user_pseudonym: bool,
    /// Start a settable clock at this instant instead of following wall time.
    pub manual_clock: Option<DateTime<Utc>>,
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
    #[error("storage unavailable: {0}")]
    StorageUnavailable(#[from] StoreError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

fn env_bool(name: &str) -> Result<bool, ServerError> {
    match std::env::var(name) {
        Err(_) => Ok(false),
        Ok(v) => match v.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => Ok(true),
            "" | "0" | "false" | "no" | "off" => Ok(false),
            _ => Err(ServerError::Config(format!("{name} must be a boolean, got {v:?}"))),
        },
    }
}

impl Config {
    /// Read `STUDYU_*` variables; the researcher token is mandatory.
    pub fn from_env() -> Result<Self, ServerError> {
        let bind = std::env::var("STUDYU_BIND").unwrap_or_else(|_| "127.0.0.1:8080".into());
        let bind = bind
            .parse()
            .map_err(|_| ServerError::Config(format!("STUDYU_BIND is not a socket address: {bind:?}")))?;
        let data_dir = std::env::var_os("STUDYU_DATA_DIR").map_or_else(|| PathBuf::from("studyu-data"), PathBuf::from);
        let researcher_token = std::env::var("STUDYU_RESEARCHER_TOKEN").unwrap_or_default();
        if researcher_token.trim().is_empty() {
            return Err(ServerError::Config("STUDYU_RESEARCHER_TOKEN must be set".into()));
        }
        let manual_clock = match std::env::var("STUDYU_MANUAL_CLOCK") {
            Ok(v) if !v.trim().is_empty() => Some(
                DateTime::parse_from_rfc3339(v.trim())
                    .map_err(|e| ServerError::Config(format!("STUDYU_MANUAL_CLOCK: {e}")))?
                    .with_timezone(&Utc),
            ),
            _ => None,
        };
        Ok(Self {
            bind,
            data_dir,
            researcher_token,
            demo_unlock_reports: env_bool("STUDYU_DEMO_UNLOCK_REPORTS")?,
            export_include_user_pseudonym: env_bool("STUDYU_EXPORT_INCLUDE_USER_PSEUDONYM")?,
            manual_clock,
        })
    }
}

/// Shared handler state; everything mutable lives in the store.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<TrialStore>,
    pub researcher_token: Arc<str>,
    pub demo_unlock_reports: bool,
    pub export_include_user_pseudonym: bool,
    /// Present when the service runs on a settable clock.
    pub manual_clock: Option<Arc<ManualClock>>,
}

impl AppState {
    pub fn new(store: Arc<TrialStore>, researcher_token: impl Into<Arc<str>>) -> Self {
        Self {
            store,
            researcher_token: researcher_token.into(),
            demo_unlock_reports: false,
            export_include_user_pseudonym: false,
            manual_clock: None,
        }
    }

    /// Open the file store named by `config`.
    pub fn from_config(config: &Config) -> Result<Self, ServerError> {
        let backend = Arc::new(FileBackend::open(&config.data_dir)?);
        let manual = config.manual_clock.map(|t| Arc::new(ManualClock::new(t)));
        let clock: Arc<dyn Clock> = match &manual {
            Some(m) => m.clone(),
            None => Arc::new(SystemClock),
        };
        let store = TrialStore::new(backend, clock, Arc::new(OsEntropy));
        Ok(Self {
            store: Arc::new(store),
            researcher_token: config.researcher_token.as_str().into(),
            demo_unlock_reports: config.demo_unlock_reports,
            export_include_user_pseudonym: config.export_include_user_pseudonym,
            manual_clock: manual,
        })
    }
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Result<Response, ApiError> {
    let presented = request
        .headers()
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match presented {
        Some(token) if token.as_bytes() == state.researcher_token.as_bytes() => Ok(next.run(request).await),
        _ => Err(ApiError::unauthorized()),
    }
}

pub fn router(state: AppState) -> Router {
    use handlers::*;
    let designer = Router::new()
        .route("/studies", get(designer_list).post(designer_save))
        .route("/studies/{id}", get(designer_get).put(designer_update).delete(designer_delete))
        .route("/studies/{id}/publish", post(designer_publish))
        .route("/studies/{id}/export.csv", get(designer_export))
        .route("/clock", put(set_clock))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    let api = Router::new()
        .route("/users", post(create_user))
        .route("/users/{id}", axum::routing::delete(delete_user))
        .route("/studies", get(list_studies))
        .route("/studies/{id}", get(get_study))
        .route("/studies/{id}/eligibility", post(check_eligibility))
        .route("/enrollments", post(enroll))
        .route("/enrollments/{id}", get(get_enrollment))
        .route("/enrollments/{id}/results", post(record_result))
        .route("/enrollments/{id}/report", get(report))
        .route("/enrollments/{id}/schedule", get(schedule))
        .route("/enrollments/{id}/opt-out", post(opt_out))
        .nest("/designer", designer);
    Router::new()
        .nest("/api/v1", api)
        .fallback(|| async { ApiError::route_not_found() })
        .with_state(state)
}

/// Serve on `listener` until `shutdown` resolves; in-flight requests complete.
pub async fn run(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// A service running on a background task.
pub struct RunningServer {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<Result<(), ServerError>>,
}

impl RunningServer {
    /// Bind `addr` (port 0 picks a free one) and serve in the background.
    pub async fn start(state: AppState, addr: SocketAddr) -> Result<Self, ServerError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServerError::BindFailure { addr, source })?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = tokio::sync::oneshot::channel();
        let task = tokio::spawn(run(listener, state, async {
            let _ = stopped.await;
        }));
        Ok(Self {
            addr,
            stop: Some(stop),
            task,
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stop accepting connections and wait for in-flight requests.
    pub async fn shutdown(mut self) -> Result<(), ServerError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.task
            .await
            .map_err(|e| ServerError::Io(std::io::Error::other(e.to_string())))?
    }
}

/// Bind and serve `config` until Ctrl-C or SIGTERM.
pub async fn serve(config: Config) -> Result<(), ServerError> {
    let state = AppState::from_config(&config)?;
    let listener = TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServerError::BindFailure { addr: config.bind, source })?;
    eprintln!("studyu listening on http://{}", listener.local_addr()?);
    run(listener, state, shutdown_signal()).await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
