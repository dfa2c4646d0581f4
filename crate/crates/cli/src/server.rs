//! One session actor per websocket connection, ticked by a wall-clock timer.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use palmland_core::session::{Outbound, Phase, Session, SessionConfig};
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub session: SessionConfig,
    /// Finished session logs are also written here when set.
    pub log_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    config: Arc<ServerConfig>,
    logs: Arc<Mutex<HashMap<String, String>>>,
    next_id: Arc<AtomicU64>,
}

pub fn router(config: ServerConfig) -> Router {
    let state = AppState {
        config: Arc::new(config),
        logs: Arc::default(),
        next_id: Arc::default(),
    };
    Router::new()
        .route("/ws", get(upgrade))
        .route("/logs/{id}", get(download_log))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| run_session(socket, state))
}

async fn download_log(Path(id): Path<String>, State(state): State<AppState>) -> Response {
    match state.logs.lock().expect("log table lock").get(&id) {
        Some(text) => (
            [(header::CONTENT_TYPE, "application/x-ndjson")],
            text.clone(),
        )
            .into_response(),
        None => (
            StatusCode::NOT_FOUND,
            format!("no finished log for session {id}"),
        )
            .into_response(),
    }
}

fn encode(msg: &Outbound) -> Message {
    Message::Text(
        serde_json::to_string(msg)
            .expect("outbound message serializes")
            .into(),
    )
}

async fn run_session(socket: WebSocket, state: AppState) {
    let n = state.next_id.fetch_add(1, Ordering::Relaxed);
    let id = format!("s{n:06}");
    let mut cfg = state.config.session.clone();
    cfg.default_seed = cfg.default_seed.wrapping_add(n);
    let mut session = match Session::new(id.clone(), cfg) {
        Ok(s) => s,
        Err(e) => {
            log::error!("cannot create session: {e}");
            return;
        }
    };
    log::info!("session {id} connected");
    let (mut tx, mut rx) = socket.split();
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(session.tick_period()));
    // Late ticks are delivered late rather than dropped, so no step is skipped.
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);

    loop {
        let out = tokio::select! {
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => session.handle_text(text.as_str()),
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => continue,
                Some(Err(e)) => {
                    log::warn!("session {id}: {e}");
                    break;
                }
            },
            _ = ticker.tick(), if session.phase() == Phase::Descending => match session.tick() {
                Ok(out) => out,
                Err(e) => vec![Outbound::error("simulation", e.to_string())],
            },
        };
        let mut out = out;
        if session.phase() == Phase::Finished {
            publish_log(&state, &session, &mut out);
        }
        for msg in &out {
            if tx.send(encode(msg)).await.is_err() {
                log::info!("session {id}: client went away");
                return;
            }
        }
        if session.ended() {
            break;
        }
    }
    let _ = tx.close().await;
    log::info!("session {id} closed");
}

/// Store the finished log once and point the trial result at it.
fn publish_log(state: &AppState, session: &Session, out: &mut [Outbound]) {
    let Some(result) = out.iter_mut().find_map(|m| match m {
        Outbound::TrialResult { log, .. } => Some(log),
        _ => None,
    }) else {
        return;
    };
    let Some(trial) = session.finished_log() else {
        return;
    };
    let text = trial.to_jsonl();
    if let Some(dir) = &state.config.log_dir {
        let path = dir.join(format!("session_{}.jsonl", session.id()));
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, &text)) {
            log::error!("cannot write {}: {e}", path.display());
        }
    }
    state
        .logs
        .lock()
        .expect("log table lock")
        .insert(session.id().to_string(), text);
    *result = Some(format!("/logs/{}", session.id()));
}
