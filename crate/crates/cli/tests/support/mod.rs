#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use studyu_server::{AppState, RunningServer};
use studyu_store::{ManualClock, MemoryBackend, SeededEntropy, TrialStore};

pub const TOKEN: &str = "researcher-token";

/// A service on its own runtime, on a manual clock, with demo-unlocked reports.
pub struct LiveServer {
    pub url: String,
    pub store: Arc<TrialStore>,
    pub backend: Arc<MemoryBackend>,
    pub clock: Arc<ManualClock>,
    runtime: tokio::runtime::Runtime,
    server: Option<RunningServer>,
}

impl LiveServer {
    pub fn start(demo_unlock: bool) -> Self {
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 1, 1, 9, 0, 0).unwrap()));
        let backend = Arc::new(MemoryBackend::new());
        let store = Arc::new(TrialStore::new(backend.clone(), clock.clone(), Arc::new(SeededEntropy::new(99))));
        let mut state = AppState::new(store.clone(), TOKEN);
        state.demo_unlock_reports = demo_unlock;
        state.manual_clock = Some(clock.clone());
        let server = runtime
            .block_on(RunningServer::start(state, SocketAddr::from(([127, 0, 0, 1], 0))))
            .unwrap();
        Self {
            url: server.url(),
            store,
            backend,
            clock,
            runtime,
            server: Some(server),
        }
    }
}

impl Drop for LiveServer {
    fn drop(&mut self) {
        if let Some(server) = self.server.take() {
            let _ = self.runtime.block_on(server.shutdown());
        }
    }
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn studyu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_studyu"))
        .args(args)
        .env_remove("STUDYU_RESEARCHER_TOKEN")
        .env_remove("STUDYU_SERVER")
        .output()
        .unwrap()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}
