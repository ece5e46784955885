//! WebSocket front end for the streaming runtime.
//!
//! Clients connect to `/stream` and send little-endian 16-bit mono PCM as
//! binary frames. Each connection gets its own one-second ring and inference
//! loop; events come back as JSON text frames. A text frame
//! `{"cmd":"reset"}` clears the ring. Any protocol violation gets a JSON
//! `{"error": ...}` message and the session is closed.
//!
//! There is no authentication or TLS. Run it on a trusted network only.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{ConnectInfo, State};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use speech2traj::model::{load_checkpoint, Network};
use speech2traj::runtime::{validate_period, DEFAULT_PERIOD_MS};
use speech2traj::{Engine, RingBuffer, TrajectoryEvent};
use tokio::sync::{watch, Notify};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

pub const STREAM_PATH: &str = "/stream";
pub const HEALTH_PATH: &str = "/healthz";
pub const OUTBOX_DEPTH: usize = 8;
pub const DEFAULT_PORT: u16 = 8765;

const DRAIN_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot load checkpoint: {0}")]
    Checkpoint(#[source] speech2traj::Error),

    #[error("invalid service configuration: {0}")]
    Config(String),

    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub period_ms: u64,
    pub outbox_depth: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            period_ms: DEFAULT_PERIOD_MS,
            outbox_depth: OUTBOX_DEPTH,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        validate_period(self.period_ms).map_err(|e| ServiceError::Config(e.to_string()))?;
        if self.outbox_depth == 0 {
            return Err(ServiceError::Config("outbox depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// What `/healthz` reports about the loaded network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub filters2: usize,
    pub trainable_params: usize,
    pub stored_params: usize,
}

impl ModelSummary {
    pub fn of(net: &Network<f32>) -> Self {
        Self {
            filters2: net.spec().filters2,
            trainable_params: net.trainable_param_count(),
            stored_params: net.stored_param_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub model: ModelSummary,
    pub sessions: usize,
    pub period_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("binary frame of {0} bytes is not a whole number of 16-bit samples")]
    OddFrameLength(usize),
    #[error("unrecognised control message: {0}")]
    BadControl(String),
}

/// Little-endian 16-bit PCM payload to samples.
pub fn decode_frame(bytes: &[u8]) -> Result<Vec<i16>, ProtocolError> {
    if bytes.len() % 2 != 0 {
        return Err(ProtocolError::OddFrameLength(bytes.len()));
    }
    Ok(bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect())
}

#[derive(Debug, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase", deny_unknown_fields)]
enum Control {
    Reset,
}

fn parse_control(text: &str) -> Result<Control, ProtocolError> {
    serde_json::from_str(text).map_err(|_| ProtocolError::BadControl(text.chars().take(80).collect()))
}

fn error_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

struct Shared {
    engine: Arc<Engine>,
    model: ModelSummary,
    period: Duration,
    outbox_depth: usize,
    sessions: AtomicUsize,
    next_id: AtomicU64,
    shutdown: watch::Receiver<bool>,
}

/// Decrements the live-session count however the session ends.
struct SessionGuard(Arc<Shared>);

impl Drop for SessionGuard {
    fn drop(&mut self) {
        self.0.sessions.fetch_sub(1, Ordering::SeqCst);
    }
}

enum Outgoing {
    Event(TrajectoryEvent),
    Error(String),
    Close,
}

/// Bounded event queue; a full queue drops its oldest event. Errors and the
/// close marker are never dropped.
struct Outbox {
    queue: Mutex<VecDeque<Outgoing>>,
    notify: Notify,
    depth: usize,
    dropped: AtomicU64,
}

impl Outbox {
    fn new(depth: usize) -> Self {
        Self {
            queue: Mutex::new(VecDeque::new()),
            notify: Notify::new(),
            depth,
            dropped: AtomicU64::new(0),
        }
    }

    fn push(&self, item: Outgoing) {
        let mut q = self.queue.lock().expect("outbox lock");
        if matches!(item, Outgoing::Event(_)) {
            let events = q.iter().filter(|o| matches!(o, Outgoing::Event(_))).count();
            if events >= self.depth {
                if let Some(i) = q.iter().position(|o| matches!(o, Outgoing::Event(_))) {
                    q.remove(i);
                    self.dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
        q.push_back(item);
        drop(q);
        self.notify.notify_one();
    }

    async fn pop(&self) -> Outgoing {
        loop {
            if let Some(item) = self.queue.lock().expect("outbox lock").pop_front() {
                return item;
            }
            self.notify.notified().await;
        }
    }
}

/// Per-connection state. Only the engine is shared with other sessions.
struct Session {
    id: u64,
    client: SocketAddr,
    ring: Arc<Mutex<RingBuffer>>,
    engine: Arc<Engine>,
    last_event: Arc<Mutex<Option<TrajectoryEvent>>>,
    outbox: Arc<Outbox>,
}

impl Session {
    fn handle_audio_frame(&self, bytes: &[u8]) -> Result<(), ProtocolError> {
        let samples = decode_frame(bytes)?;
        self.ring.lock().expect("ring lock").push(&samples);
        Ok(())
    }

    fn handle_control(&self, text: &str) -> Result<(), ProtocolError> {
        match parse_control(text)? {
            Control::Reset => self.ring.lock().expect("ring lock").reset(),
        }
        Ok(())
    }

    fn spawn_inference(&self, period: Duration) -> JoinHandle<()> {
        let ring = Arc::clone(&self.ring);
        let engine = Arc::clone(&self.engine);
        let outbox = Arc::clone(&self.outbox);
        let last = Arc::clone(&self.last_event);
        let tag = format!("session-{}", self.id);
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
            // a tick that lands while inference is still running is skipped
            ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
            loop {
                ticker.tick().await;
                let clip = ring.lock().expect("ring lock").snapshot_clip(tag.clone());
                let engine = Arc::clone(&engine);
                match tokio::task::spawn_blocking(move || engine.infer_clip(&clip)).await {
                    Ok(Ok(event)) => {
                        *last.lock().expect("event lock") = Some(event.clone());
                        outbox.push(Outgoing::Event(event));
                    }
                    Ok(Err(e)) => {
                        outbox.push(Outgoing::Error(format!("inference failed: {e}")));
                        outbox.push(Outgoing::Close);
                        return;
                    }
                    Err(_) => return,
                }
            }
        })
    }
}

async fn emit(mut sink: futures_util::stream::SplitSink<WebSocket, Message>, outbox: Arc<Outbox>) {
    loop {
        let msg = match outbox.pop().await {
            Outgoing::Event(e) => Message::Text(e.to_json().into()),
            Outgoing::Error(s) => Message::Text(error_json(&s).into()),
            Outgoing::Close => {
                let _ = sink
                    .send(Message::Close(Some(CloseFrame {
                        code: axum::extract::ws::close_code::NORMAL,
                        reason: "".into(),
                    })))
                    .await;
                return;
            }
        };
        if sink.send(msg).await.is_err() {
            return;
        }
    }
}

async fn run_session(shared: Arc<Shared>, socket: WebSocket, client: SocketAddr) {
    let guard = SessionGuard(Arc::clone(&shared));
    let session = Session {
        id: shared.next_id.fetch_add(1, Ordering::SeqCst),
        client,
        ring: Arc::new(Mutex::new(RingBuffer::new())),
        engine: Arc::clone(&shared.engine),
        last_event: Arc::new(Mutex::new(None)),
        outbox: Arc::new(Outbox::new(shared.outbox_depth)),
    };
    log::info!("session {} opened from {}", session.id, session.client);

    let (sink, mut stream) = socket.split();
    let mut emitter = tokio::spawn(emit(sink, Arc::clone(&session.outbox)));
    let inference = session.spawn_inference(shared.period);
    let mut shutdown = shared.shutdown.clone();

    loop {
        tokio::select! {
            msg = stream.next() => {
                let result = match msg {
                    Some(Ok(Message::Binary(bytes))) => session.handle_audio_frame(&bytes),
                    Some(Ok(Message::Text(text))) => session.handle_control(&text),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => Ok(()),
                };
                if let Err(e) = result {
                    log::warn!("session {}: {e}", session.id);
                    session.outbox.push(Outgoing::Error(e.to_string()));
                    break;
                }
            }
            _ = &mut emitter => break,
            _ = shutdown.wait_for(|stop| *stop) => break,
        }
    }

    inference.abort();
    session.outbox.push(Outgoing::Close);
    if !emitter.is_finished() {
        let _ = tokio::time::timeout(DRAIN_TIMEOUT, &mut emitter).await;
    }
    emitter.abort();
    log::info!(
        "session {} closed ({} events dropped, last event {:?})",
        session.id,
        session.outbox.dropped.load(Ordering::Relaxed),
        session.last_event.lock().expect("event lock").as_ref().map(|e| e.ts_ms)
    );
    drop(guard);
}

async fn stream_upgrade(
    ws: WebSocketUpgrade,
    ConnectInfo(client): ConnectInfo<SocketAddr>,
    State(shared): State<Arc<Shared>>,
) -> Response {
    shared.sessions.fetch_add(1, Ordering::SeqCst);
    ws.on_upgrade(move |socket| run_session(shared, socket, client))
        .into_response()
}

async fn healthz(State(shared): State<Arc<Shared>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        model: shared.model.clone(),
        sessions: shared.sessions.load(Ordering::SeqCst),
        period_ms: shared.period.as_millis() as u64,
    })
}

/// A running server bound to a local address.
pub struct Server {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: watch::Sender<bool>,
    task: JoinHandle<std::io::Result<()>>,
}

impl Server {
    pub async fn start(config: ServiceConfig, network: Network<f32>) -> Result<Self, ServiceError> {
        let model = ModelSummary::of(&network);
        Self::start_with_engine(config, Arc::new(Engine::from_network(network)), model).await
    }

    /// Loads the checkpoint first so a bad file fails before the port is taken.
    pub async fn start_from_checkpoint(config: ServiceConfig, checkpoint: &Path) -> Result<Self, ServiceError> {
        let (net, _) = load_checkpoint(checkpoint).map_err(ServiceError::Checkpoint)?;
        Self::start(config, net).await
    }

    pub async fn start_with_engine(
        config: ServiceConfig,
        engine: Arc<Engine>,
        model: ModelSummary,
    ) -> Result<Self, ServiceError> {
        config.validate()?;
        let listener = tokio::net::TcpListener::bind(config.bind)
            .await
            .map_err(|source| ServiceError::Bind {
                addr: config.bind,
                source,
            })?;
        let addr = listener.local_addr().map_err(ServiceError::Serve)?;
        let (stop, stop_rx) = watch::channel(false);
        let shared = Arc::new(Shared {
            engine,
            model,
            period: Duration::from_millis(config.period_ms),
            outbox_depth: config.outbox_depth,
            sessions: AtomicUsize::new(0),
            next_id: AtomicU64::new(1),
            shutdown: stop_rx.clone(),
        });
        let app = Router::new()
            .route(STREAM_PATH, get(stream_upgrade))
            .route(HEALTH_PATH, get(healthz))
            .with_state(Arc::clone(&shared));
        let mut signal = stop_rx;
        let task = tokio::spawn(async move {
            axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
                .with_graceful_shutdown(async move {
                    let _ = signal.wait_for(|stop| *stop).await;
                })
                .await
        });
        log::info!("listening on {addr}");
        Ok(Self {
            addr,
            shared,
            stop,
            task,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn session_count(&self) -> usize {
        self.shared.sessions.load(Ordering::SeqCst)
    }

    /// Stops accepting, closes every session and waits for them to finish.
    pub async fn shutdown(self) -> Result<(), ServiceError> {
        let _ = self.stop.send(true);
        let result = match self.task.await {
            Ok(r) => r.map_err(ServiceError::Serve),
            Err(e) => Err(ServiceError::Serve(std::io::Error::other(e))),
        };
        let deadline = tokio::time::Instant::now() + DRAIN_TIMEOUT;
        while self.shared.sessions.load(Ordering::SeqCst) > 0 && tokio::time::Instant::now() < deadline {
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        result
    }
}
