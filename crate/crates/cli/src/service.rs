//! Live session service: one web-socket connection drives one session.

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;

use teletwin_core::scenario::bundled_scenario;
use teletwin_core::scoring::Report;
use teletwin_core::session::protocol::{decode, encode, ErrorCode, Message, StartSession};
use teletwin_core::session::{frame_line, log_header, EngineConfig, InputFrame, PushError, SessionDriver};

pub struct ServiceState {
    pub engine: EngineConfig,
    /// Reports and recorded input logs are written here.
    pub reports_dir: PathBuf,
    next_id: AtomicU64,
}

impl ServiceState {
    pub fn new(engine: EngineConfig, reports_dir: PathBuf) -> Self {
        Self {
            engine,
            reports_dir,
            next_id: AtomicU64::new(1),
        }
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new().route("/ws", get(upgrade)).with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    fs::create_dir_all(&state.reports_dir)?;
    axum::serve(listener, router(state)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

struct Live {
    id: String,
    driver: SessionDriver,
    recording: Option<File>,
    finished: bool,
}

impl Live {
    fn record(&mut self, frame: &InputFrame) {
        if let Some(f) = &mut self.recording {
            if writeln!(f, "{}", frame_line(frame)).is_err() {
                tracing::warn!(session = %self.id, "input recording stopped");
                self.recording = None;
            }
        }
    }
}

async fn send(socket: &mut WebSocket, session: Option<&str>, msg: &Message) -> bool {
    socket
        .send(WsMessage::Text(encode(session, msg).into()))
        .await
        .is_ok()
}

fn persist(state: &ServiceState, id: &str, report: &Report) {
    let path = state.reports_dir.join(format!("{id}.report.json"));
    let tmp = path.with_extension("json.tmp");
    let written = fs::write(&tmp, report.to_canonical_json()).and_then(|()| fs::rename(&tmp, &path));
    if let Err(e) = written {
        tracing::error!(session = %id, path = %path.display(), "could not write report: {e}");
    }
}

fn open_recording(state: &ServiceState, id: &str) -> Option<File> {
    let path = state.reports_dir.join(format!("{id}.jsonl"));
    let mut f = OpenOptions::new()
        .create(true)
        .truncate(true)
        .write(true)
        .open(&path)
        .ok()?;
    writeln!(f, "{}", log_header()).ok()?;
    Some(f)
}

async fn connection(mut socket: WebSocket, state: Arc<ServiceState>) {
    let mut live: Option<Live> = None;
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            WsMessage::Text(t) => t,
            WsMessage::Close(_) => break,
            WsMessage::Binary(_) => {
                let sid = live.as_ref().map(|l| l.id.clone());
                let err = Message::error(ErrorCode::Malformed, "binary frames are not supported");
                if !send(&mut socket, sid.as_deref(), &err).await {
                    break;
                }
                continue;
            }
            _ => continue,
        };
        let sid = live.as_ref().map(|l| l.id.clone());
        let reply_err = |code, text: String| Message::error(code, text);
        match decode(text.as_str()) {
            Err(e) => {
                if !send(
                    &mut socket,
                    sid.as_deref(),
                    &reply_err(ErrorCode::Malformed, e.to_string()),
                )
                .await
                {
                    break;
                }
            }
            Ok((_, Message::StartSession(StartSession { scenario_id }))) => {
                if live.is_some() {
                    let err = reply_err(
                        ErrorCode::SessionExists,
                        "this connection already has a session".into(),
                    );
                    if !send(&mut socket, sid.as_deref(), &err).await {
                        break;
                    }
                    continue;
                }
                let Some(def) = bundled_scenario(&scenario_id) else {
                    let err = reply_err(
                        ErrorCode::UnknownScenario,
                        format!("unknown scenario `{scenario_id}`"),
                    );
                    send(&mut socket, None, &err).await;
                    let _ = socket.send(WsMessage::Close(None)).await;
                    return;
                };
                let id = format!("session-{}", state.next_id.fetch_add(1, Ordering::Relaxed));
                tracing::info!(session = %id, scenario = %scenario_id, "session started");
                let driver = SessionDriver::new(state.engine.clone(), def);
                let first = Message::Snapshot(Box::new(driver.snapshot()));
                live = Some(Live {
                    recording: open_recording(&state, &id),
                    id,
                    driver,
                    finished: false,
                });
                let l = live.as_ref().unwrap();
                if !send(&mut socket, Some(&l.id), &first).await {
                    break;
                }
            }
            Ok((_, Message::InputFrame(frame))) => {
                let Some(l) = live.as_mut() else {
                    let err = reply_err(ErrorCode::NoSession, "send start_session first".into());
                    if !send(&mut socket, None, &err).await {
                        break;
                    }
                    continue;
                };
                if l.finished {
                    let err = reply_err(ErrorCode::Halted, "the session has ended".into());
                    if !send(&mut socket, Some(&l.id), &err).await {
                        break;
                    }
                    continue;
                }
                let outs = match l.driver.push(frame) {
                    Ok(outs) => outs,
                    Err(e) => {
                        let code = match e {
                            PushError::OutOfOrder { .. } => ErrorCode::OutOfOrder,
                            PushError::Invalid(_) => ErrorCode::InvalidFrame,
                        };
                        let err = reply_err(code, format!("frame dropped: {e}"));
                        if !send(&mut socket, Some(&l.id), &err).await {
                            break;
                        }
                        continue;
                    }
                };
                l.record(&frame);
                let id = l.id.clone();
                for out in outs {
                    if !send(&mut socket, Some(&id), &Message::Snapshot(Box::new(out.snapshot))).await {
                        break;
                    }
                    for e in out.events {
                        if !send(&mut socket, Some(&id), &Message::Event(e)).await {
                            break;
                        }
                    }
                }
                if l.driver.is_halted() {
                    l.finished = true;
                    let report = l.driver.report();
                    persist(&state, &id, &report);
                    tracing::info!(session = %id, total = report.total, "session finished");
                    if !send(&mut socket, Some(&id), &Message::Report(report)).await {
                        break;
                    }
                }
            }
            Ok((_, other)) => {
                let err = reply_err(
                    ErrorCode::Malformed,
                    format!("clients may not send `{}`", other.kind()),
                );
                if !send(&mut socket, sid.as_deref(), &err).await {
                    break;
                }
            }
        }
    }
    if let Some(l) = live {
        if !l.finished {
            let report = l.driver.disconnected_report();
            persist(&state, &l.id, &report);
            tracing::info!(session = %l.id, "client left mid-session");
        }
    }
}
