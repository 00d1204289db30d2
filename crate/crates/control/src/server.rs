//! Network front ends: newline-delimited envelopes over TCP, the same
//! envelopes over a WebSocket at `/ws`, event-log backfill at `/log`, and
//! optional static files for a browser console.

use std::net::{SocketAddr, TcpListener as StdListener};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::oneshot;
use tower_http::services::ServeDir;

use crate::broker::{Broker, SubscriberId};
use crate::envelope::Envelope;
use crate::link::{CommandSink, InboundCommand};
use crate::topic::{BrokerTopic, Channel, Topic};

pub const DEFAULT_TCP_PORT: u16 = 7788;
pub const DEFAULT_HTTP_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("address {0} is already in use")]
    PortInUse(SocketAddr),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub tcp: SocketAddr,
    pub http: Option<SocketAddr>,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            tcp: SocketAddr::from(([127, 0, 0, 1], DEFAULT_TCP_PORT)),
            http: Some(SocketAddr::from(([127, 0, 0, 1], DEFAULT_HTTP_PORT))),
            static_dir: None,
        }
    }
}

fn bind(addr: SocketAddr) -> Result<StdListener, ServerError> {
    let l = StdListener::bind(addr).map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServerError::PortInUse(addr),
        _ => ServerError::Io(e),
    })?;
    l.set_nonblocking(true)?;
    Ok(l)
}

/// Running server. Dropping it (or calling [`ServerHandle::shutdown`]) stops
/// all sessions.
pub struct ServerHandle {
    pub tcp_addr: SocketAddr,
    pub http_addr: Option<SocketAddr>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn start(config: ServerConfig, broker: Arc<Broker>, sink: CommandSink) -> Result<Self, ServerError> {
        let tcp = bind(config.tcp)?;
        let http = config.http.map(bind).transpose()?;
        let tcp_addr = tcp.local_addr()?;
        let http_addr = http.as_ref().map(|l| l.local_addr()).transpose()?;
        let (stop, stopped) = oneshot::channel();
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .thread_name("hush-net")
            .enable_all()
            .build()?;
        let thread = std::thread::Builder::new().name("hush-server".into()).spawn(move || {
            rt.block_on(async move {
                let shared = Shared { broker, sink };
                match TcpListener::from_std(tcp) {
                    Ok(l) => {
                        tokio::spawn(accept_tcp(l, shared.clone()));
                    }
                    Err(e) => log::error!("tcp listener: {e}"),
                }
                if let Some(h) = http {
                    match TcpListener::from_std(h) {
                        Ok(l) => {
                            let app = router(shared.clone(), config.static_dir.clone());
                            tokio::spawn(async move {
                                if let Err(e) = axum::serve(l, app).await {
                                    log::error!("http server: {e}");
                                }
                            });
                        }
                        Err(e) => log::error!("http listener: {e}"),
                    }
                }
                let _ = stopped.await;
            });
            rt.shutdown_timeout(std::time::Duration::from_secs(1));
        })?;
        Ok(Self {
            tcp_addr,
            http_addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

#[derive(Clone)]
struct Shared {
    broker: Arc<Broker>,
    sink: CommandSink,
}

/// Per-connection protocol state.
struct Session {
    shared: Shared,
    id: SubscriberId,
    last_seq: Option<u64>,
}

impl Session {
    fn error(&self, reason: &str, detail: Value) {
        self.shared
            .broker
            .send_to(self.id, BrokerTopic::Error, json!({"reason": reason, "detail": detail}));
    }

    fn handle(&mut self, line: &str) {
        if line.trim().is_empty() {
            return;
        }
        let env = match Envelope::from_line(line) {
            Ok(e) => e,
            Err(e) => return self.error("malformed-envelope", json!(e.to_string())),
        };
        if self.last_seq.is_some_and(|l| env.seq <= l) {
            return self.error("seq-not-increasing", json!(env.seq));
        }
        self.last_seq = Some(env.seq);
        let topic = match env.topic.parse::<Topic>() {
            Ok(t) => t,
            Err(_) => return self.error("malformed-topic", json!(env.topic)),
        };
        let broker = &self.shared.broker;
        match topic {
            Topic::Broker(BrokerTopic::Hello) => {
                broker.send_to(self.id, BrokerTopic::Hello, json!({"client": self.id}));
            }
            Topic::Broker(BrokerTopic::Subscribe) => {
                let filters: Vec<String> = match &env.payload["filters"] {
                    Value::Array(a) => a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
                    _ => return self.error("bad-payload", json!("expected {\"filters\": [...]}")),
                };
                let mut accepted = Vec::new();
                for f in filters {
                    match broker.subscribe(self.id, &f) {
                        Ok(()) => accepted.push(f),
                        Err(_) => self.error("malformed-filter", json!(f)),
                    }
                }
                broker.send_to(self.id, BrokerTopic::Subscribe, json!({"filters": accepted}));
            }
            Topic::Unit {
                id,
                channel: Channel::Cmd,
            } => {
                let _ = broker.publish(&env.topic, env.payload.clone());
                let cmd = InboundCommand {
                    unit: id.clone(),
                    client: self.id,
                    seq: env.seq,
                    payload: env.payload,
                };
                if let Err(cmd) = self.shared.sink.try_send(cmd) {
                    let _ = broker.publish(
                        &Topic::unit(id, Channel::Ack).to_string(),
                        json!({
                            "ok": false,
                            "error": "busy",
                            "client": cmd.client,
                            "ref_seq": cmd.seq,
                            "cmd": cmd.payload.get("cmd").cloned().unwrap_or(Value::Null),
                        }),
                    );
                }
            }
            Topic::Broker(BrokerTopic::Error) | Topic::Unit { .. } => {
                self.error("read-only-topic", json!(env.topic));
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.shared.broker.disconnect(self.id);
    }
}

async fn accept_tcp(listener: TcpListener, shared: Shared) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                log::debug!("tcp client {peer}");
                tokio::spawn(tcp_session(stream, shared.clone()));
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

async fn tcp_session(stream: TcpStream, shared: Shared) {
    let _ = stream.set_nodelay(true);
    let (r, mut w) = stream.into_split();
    let mut lines = BufReader::new(r).lines();
    let mut sub = shared.broker.connect();
    let mut session = Session {
        shared,
        id: sub.id,
        last_seq: None,
    };
    loop {
        tokio::select! {
            l = lines.next_line() => match l {
                Ok(Some(l)) => session.handle(&l),
                _ => break,
            },
            m = sub.rx.recv() => match m {
                Some(line) => {
                    let mut buf = Vec::with_capacity(line.len() + 1);
                    buf.extend_from_slice(line.as_bytes());
                    buf.push(b'\n');
                    if w.write_all(&buf).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
        }
    }
}

fn router(shared: Shared, static_dir: Option<PathBuf>) -> Router {
    let r = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/log", get(log_backfill))
        .with_state(shared);
    match static_dir {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r,
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| ws_session(socket, shared))
}

async fn ws_session(mut socket: WebSocket, shared: Shared) {
    let mut sub = shared.broker.connect();
    let mut session = Session {
        shared,
        id: sub.id,
        last_seq: None,
    };
    loop {
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(t))) => {
                    for l in t.as_str().lines() {
                        session.handle(l);
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            m = sub.rx.recv() => match m {
                Some(line) => {
                    if socket.send(Message::Text(line.to_string().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
        }
    }
}

#[derive(Deserialize)]
struct LogQuery {
    #[serde(default)]
    since: u64,
}

async fn log_backfill(Query(q): Query<LogQuery>, State(shared): State<Shared>) -> impl IntoResponse {
    let mut body = String::new();
    for l in shared.broker.log_since(q.since) {
        body.push_str(&l);
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body)
}
