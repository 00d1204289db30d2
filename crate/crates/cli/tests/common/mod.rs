#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::time::Duration;

use hush_cli::ScenarioConfig;
use hush_control::Envelope;
use serde_json::{json, Value};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn bundled(name: &str) -> (ScenarioConfig, Vec<u8>) {
    hush_cli::load_scenario(&scenario_path(name)).unwrap()
}

pub fn hush() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_hush"))
}

/// One unit, explicit pure-delay paths, feedforward on a 120 Hz tone. No
/// saturation unless `clip` is given.
pub fn tone_scenario(mu: f64, rho: Option<f64>, clip: Option<f64>, duration_s: f64) -> Value {
    let sat = match clip {
        Some(l) => json!({"kind": "hard_clip", "limit": l}),
        None => json!({"kind": "none"}),
    };
    json!({
        "schema_version": 1,
        "name": "tone",
        "sample_rate": 8000,
        "duration_s": duration_s,
        "seed": 5,
        "plant": {
            "sources": [{"signal": {"kind": "tone", "freq_hz": 120.0, "amplitude": 1.0}}],
            "units": [{"saturation": sat}],
            "paths": {
                "kind": "explicit",
                "primary": [[{"delay": 20, "gain": 1.0}]],
                "secondary": [[{"delay": 5, "gain": 1.0}]]
            }
        },
        "units": [{
            "mode": "feedforward",
            "controller": {"algorithm": "mov_fxlms", "mu": mu, "rho": rho, "filter_len": 32, "frame_len": 200}
        }],
        "metrics": {"analysis_window_s": (duration_s / 4.0).max(1.0), "psd_segment": 2048, "write_signals": false}
    })
}

pub fn config(v: &Value) -> (ScenarioConfig, Vec<u8>) {
    let bytes = serde_json::to_vec_pretty(v).unwrap();
    (hush_cli::parse_scenario(&bytes).unwrap(), bytes)
}

/// Line-oriented TCP client for the control plane.
pub struct TcpClient {
    w: TcpStream,
    r: BufReader<TcpStream>,
    seq: u64,
    pub id: u64,
}

impl TcpClient {
    pub fn connect(addr: SocketAddr) -> Self {
        let w = TcpStream::connect(addr).unwrap();
        w.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        let r = BufReader::new(w.try_clone().unwrap());
        let mut c = Self { w, r, seq: 0, id: 0 };
        c.send("broker/hello", json!({}));
        c.id = c.next_on("broker/hello").payload["client"].as_u64().unwrap();
        c
    }

    pub fn send(&mut self, topic: &str, payload: Value) -> u64 {
        self.seq += 1;
        let line = Envelope::new(topic, self.seq, payload).to_line();
        self.w.write_all(line.as_bytes()).unwrap();
        self.w.write_all(b"\n").unwrap();
        self.seq
    }

    pub fn next(&mut self) -> Envelope {
        let mut l = String::new();
        self.r.read_line(&mut l).unwrap();
        Envelope::from_line(l.trim_end()).unwrap()
    }

    pub fn next_on(&mut self, topic: &str) -> Envelope {
        loop {
            let e = self.next();
            if e.topic == topic {
                return e;
            }
        }
    }

    pub fn subscribe(&mut self, filters: &[&str]) {
        self.send("broker/subscribe", json!({ "filters": filters }));
        self.next_on("broker/subscribe");
    }

    /// Sends a command and waits for the matching ack. The caller must be
    /// subscribed to the unit's ack topic.
    pub fn command(&mut self, unit: &str, payload: Value) -> Value {
        let seq = self.send(&format!("unit/{unit}/cmd"), payload);
        let ack = format!("unit/{unit}/ack");
        let deadline = std::time::Instant::now() + Duration::from_secs(10);
        loop {
            assert!(std::time::Instant::now() < deadline, "no ack for seq {seq}");
            let e = self.next_on(&ack);
            if e.payload["client"] == self.id && e.payload["ref_seq"] == seq {
                return e.payload;
            }
        }
    }
}
