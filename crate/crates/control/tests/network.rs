use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use hush_control::{
    command_queue, outbound_queue, spawn_forwarder, Broker, Command, Envelope, ServerConfig, ServerError,
    ServerHandle, TelemetryFrame, UnitStateMachine,
};
use hush_core::adaptive::ControllerParams;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

const PERIOD: Duration = Duration::from_millis(100);

/// Minimal stand-in for the DSP loop: one unit, commands applied every
/// 10 ms, telemetry every period.
struct FakeDsp {
    stop: Arc<AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
    forwarder: Option<std::thread::JoinHandle<()>>,
}

impl Drop for FakeDsp {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.thread.take().unwrap().join().unwrap();
        self.forwarder.take().unwrap().join().unwrap();
    }
}

fn start(static_dir: Option<std::path::PathBuf>) -> (ServerHandle, Arc<Broker>, FakeDsp) {
    let broker = Arc::new(Broker::new(256));
    let (sink, source) = command_queue(64);
    let (out, rx) = outbound_queue(1024);
    let forwarder = spawn_forwarder(rx, broker.clone());
    let stop = Arc::new(AtomicBool::new(false));
    let s2 = stop.clone();
    let thread = std::thread::spawn(move || {
        let mut m = UnitStateMachine::new(ControllerParams::default());
        let mut last = Instant::now();
        let mut t = 0.0;
        while !s2.load(Ordering::Relaxed) {
            while let Some(c) = source.poll() {
                let (ok, err) = match Command::from_payload(&c.payload) {
                    Ok(cmd) => match m.apply(&cmd) {
                        Ok(_) => (true, None),
                        Err(r) => (false, Some(r.reason())),
                    },
                    Err(r) => (false, Some(r.reason())),
                };
                if m.state() == hush_control::UnitState::Calibrating {
                    m.calibration_finished(true);
                }
                out.push(
                    format!("unit/{}/ack", c.unit),
                    json!({"ok": ok, "error": err, "client": c.client, "ref_seq": c.seq, "state": m.state()}),
                );
            }
            if last.elapsed() >= PERIOD {
                last += PERIOD;
                t += 0.1;
                let mut f = TelemetryFrame::idle(t);
                f.mode = m.state();
                out.push("unit/1/telemetry", serde_json::to_value(f).unwrap());
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    });
    let config = ServerConfig {
        tcp: "127.0.0.1:0".parse().unwrap(),
        http: Some("127.0.0.1:0".parse().unwrap()),
        static_dir,
    };
    let server = ServerHandle::start(config, broker.clone(), sink).unwrap();
    (
        server,
        broker,
        FakeDsp {
            stop,
            thread: Some(thread),
            forwarder: Some(forwarder),
        },
    )
}

struct TcpClient {
    w: TcpStream,
    r: BufReader<TcpStream>,
    seq: u64,
}

impl TcpClient {
    fn connect(addr: SocketAddr) -> Self {
        let w = TcpStream::connect(addr).unwrap();
        w.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        let r = BufReader::new(w.try_clone().unwrap());
        Self { w, r, seq: 0 }
    }

    fn send(&mut self, topic: &str, payload: Value) -> u64 {
        self.seq += 1;
        self.send_raw(&Envelope::new(topic, self.seq, payload).to_line());
        self.seq
    }

    fn send_raw(&mut self, line: &str) {
        self.w.write_all(line.as_bytes()).unwrap();
        self.w.write_all(b"\n").unwrap();
    }

    fn next(&mut self) -> Envelope {
        let mut l = String::new();
        self.r.read_line(&mut l).unwrap();
        Envelope::from_line(l.trim_end()).unwrap()
    }

    fn next_on(&mut self, topic: &str) -> Envelope {
        loop {
            let e = self.next();
            if e.topic == topic {
                return e;
            }
        }
    }

    fn subscribe(&mut self, filters: &[&str]) {
        self.send("broker/subscribe", json!({ "filters": filters }));
        let e = self.next_on("broker/subscribe");
        assert_eq!(e.payload["filters"].as_array().unwrap().len(), filters.len());
    }
}

fn http_get(addr: SocketAddr, path: &str) -> (String, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).unwrap();
    let (head, body) = buf.split_once("\r\n\r\n").unwrap();
    (head.to_string(), body.to_string())
}

#[test]
fn commands_are_acked_within_two_periods() {
    let (server, _b, _dsp) = start(None);
    let mut c = TcpClient::connect(server.tcp_addr);
    c.subscribe(&["unit/1/ack"]);
    let cases = [
        (json!({"cmd": "set_mode", "mode": "feedback"}), false, Some("not-calibrated")),
        (json!({"cmd": "calibrate"}), true, None),
        (json!({"cmd": "set_mode", "mode": "feedback"}), true, None),
        (json!({"cmd": "launch"}), false, Some("unknown-cmd")),
        (json!({"cmd": "get_state"}), true, None),
    ];
    for (payload, ok, err) in cases {
        let sent = Instant::now();
        let seq = c.send("unit/1/cmd", payload);
        let ack = c.next_on("unit/1/ack");
        assert!(sent.elapsed() < 2 * PERIOD, "{:?}", sent.elapsed());
        assert_eq!(ack.payload["ref_seq"], json!(seq));
        assert_eq!(ack.payload["ok"], json!(ok));
        assert_eq!(ack.payload["error"].as_str(), err);
    }
}

#[test]
fn malformed_input_yields_connection_errors() {
    let (server, _b, _dsp) = start(None);
    let mut c = TcpClient::connect(server.tcp_addr);
    c.send_raw("not json");
    assert_eq!(c.next_on("broker/error").payload["reason"], "malformed-envelope");
    c.send("unit/1", json!({}));
    assert_eq!(c.next_on("broker/error").payload["reason"], "malformed-topic");
    c.send_raw(&Envelope::new("broker/hello", 1, json!({})).to_line());
    assert_eq!(c.next_on("broker/error").payload["reason"], "seq-not-increasing");
    c.send("unit/1/telemetry", json!({}));
    assert_eq!(c.next_on("broker/error").payload["reason"], "read-only-topic");
    c.send("broker/subscribe", json!({"filters": ["unit/+/ack"]}));
    assert_eq!(c.next_on("broker/error").payload["reason"], "malformed-filter");
}

#[test]
fn telemetry_cadence_and_increasing_seq() {
    let (server, _b, _dsp) = start(None);
    let mut c = TcpClient::connect(server.tcp_addr);
    c.subscribe(&["unit/1/telemetry"]);
    let start = Instant::now();
    let mut seqs = Vec::new();
    while start.elapsed() < Duration::from_secs(2) {
        let e = c.next();
        let f: TelemetryFrame = serde_json::from_value(e.payload).unwrap();
        assert!(f.is_finite());
        seqs.push(e.seq);
    }
    assert!((19..=21).contains(&seqs.len()), "{}", seqs.len());
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn port_in_use_is_reported() {
    let (server, broker, _dsp) = start(None);
    let (sink, _src) = command_queue(1);
    let config = ServerConfig {
        tcp: server.tcp_addr,
        http: None,
        static_dir: None,
    };
    assert!(matches!(ServerHandle::start(config, broker, sink), Err(ServerError::PortInUse(_))));
}

#[test]
fn log_backfill_and_static_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>console</h1>").unwrap();
    let (server, broker, _dsp) = start(Some(dir.path().to_path_buf()));
    let http = server.http_addr.unwrap();
    std::thread::sleep(3 * PERIOD);
    let (head, body) = http_get(http, "/log");
    assert!(head.contains("200") && head.contains("application/x-ndjson"), "{head}");
    let lines: Vec<Envelope> = body.lines().map(|l| Envelope::from_line(l).unwrap()).collect();
    assert!(lines.len() >= 2);
    assert_eq!(lines.len(), broker.log_since(0).len().min(lines.len()));
    let since = lines[0].seq;
    let (_, tail) = http_get(http, &format!("/log?since={since}"));
    assert!(tail.lines().all(|l| Envelope::from_line(l).unwrap().seq > since));
    let (head, body) = http_get(http, "/index.html");
    assert!(head.contains("200"));
    assert_eq!(body, "<h1>console</h1>");
}

async fn ws_frames(url: String, n: usize) -> Vec<Envelope> {
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    let sub = Envelope::new("broker/subscribe", 1, json!({"filters": ["unit/#"]}));
    ws.send(Message::Text(sub.to_line().into())).await.unwrap();
    let mut out = Vec::new();
    while out.len() < n {
        let Some(Ok(Message::Text(t))) = ws.next().await else {
            panic!("socket closed")
        };
        let e = Envelope::from_line(t.as_str()).unwrap();
        if e.topic == "unit/1/telemetry" {
            out.push(e);
        }
    }
    out
}

#[test]
fn websocket_clients_see_identical_sequences() {
    let (server, broker, _dsp) = start(None);
    let url = format!("ws://{}/ws", server.http_addr.unwrap());
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let (a, b) = rt.block_on(async {
        let a = tokio::spawn(ws_frames(url.clone(), 12));
        let b = tokio::spawn(ws_frames(url, 12));
        (a.await.unwrap(), b.await.unwrap())
    });
    // Both joined at slightly different moments; compare the common part.
    let start = a[0].seq.max(b[0].seq);
    let ca: Vec<_> = a.iter().filter(|e| e.seq >= start).collect();
    let cb: Vec<_> = b.iter().filter(|e| e.seq >= start).collect();
    let n = ca.len().min(cb.len());
    assert!(n >= 10);
    assert_eq!(ca[..n], cb[..n]);
    assert!(broker.subscriber_count() <= 2);
}

#[test]
fn stalled_subscriber_does_not_slow_the_publisher() {
    let broker = Arc::new(Broker::new(8));
    let stalled = broker.connect();
    broker.subscribe(stalled.id, "#").unwrap();
    let (out, rx) = outbound_queue(16);
    let fwd = spawn_forwarder(rx, broker.clone());
    let t0 = Instant::now();
    let mut pushed = 0;
    for i in 0..20_000 {
        if out.push("unit/1/telemetry", json!(i)) {
            pushed += 1;
        }
    }
    assert!(t0.elapsed() < Duration::from_secs(1));
    drop(out);
    fwd.join().unwrap();
    assert_eq!(stalled.dropped() as usize + 8, pushed);
}
