//! Live simulation behind the control plane.
//!
//! The DSP thread owns the [`Simulation`]. It advances simulated time at
//! `speed` times wall-clock, drains inbound commands between sample
//! blocks and publishes telemetry on a fixed wall-clock cadence, so a
//! paused session still reports (with frozen `t`).

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use hush_control::{
    command_queue, outbound_queue, spawn_forwarder, Broker, CommandSource, OutboundQueue, ServerConfig, ServerError,
    ServerHandle,
};

use crate::engine::Simulation;
use crate::error::CliError;
use crate::scenario::ScenarioConfig;

const COMMAND_QUEUE: usize = 256;
const OUTBOUND_QUEUE: usize = 4096;
const SUBSCRIBER_QUEUE: usize = 1024;
/// Upper bound on samples simulated between two command polls.
const MAX_BLOCK: u64 = 256;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub tcp: SocketAddr,
    pub http: Option<SocketAddr>,
    pub static_dir: Option<PathBuf>,
    /// Simulated seconds per wall-clock second; 0 pauses.
    pub speed: f64,
    /// Telemetry frames per wall-clock second.
    pub telemetry_hz: f64,
    /// Append every published envelope here.
    pub log_path: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        let c = ServerConfig::default();
        Self {
            tcp: c.tcp,
            http: c.http,
            static_dir: None,
            speed: 1.0,
            telemetry_hz: 10.0,
            log_path: None,
        }
    }
}

/// Simulated time, readable from other threads.
#[derive(Debug, Default)]
pub struct Clock {
    ticks: AtomicU64,
}

impl Clock {
    pub fn ticks(&self) -> u64 {
        self.ticks.load(Ordering::Relaxed)
    }
}

pub struct ServeSession {
    pub tcp_addr: SocketAddr,
    pub http_addr: Option<SocketAddr>,
    pub broker: Arc<Broker>,
    pub clock: Arc<Clock>,
    stop: Arc<AtomicBool>,
    dsp: Option<JoinHandle<Result<(), CliError>>>,
    forwarder: Option<JoinHandle<()>>,
    server: Option<ServerHandle>,
}

impl ServeSession {
    pub fn start(cfg: &ScenarioConfig, opts: ServeOptions) -> Result<Self, CliError> {
        if !(opts.speed >= 0.0 && opts.speed.is_finite()) {
            return Err(CliError::InvalidScenario(vec![format!("speed must be finite and >= 0, got {}", opts.speed)]));
        }
        let sim = Simulation::new(cfg)?;
        let broker = Arc::new(Broker::new(SUBSCRIBER_QUEUE));
        if let Some(p) = &opts.log_path {
            broker.log_to_file(p)?;
        }
        let (sink, source) = command_queue(COMMAND_QUEUE);
        let server = ServerHandle::start(
            ServerConfig {
                tcp: opts.tcp,
                http: opts.http,
                static_dir: opts.static_dir.clone(),
            },
            broker.clone(),
            sink,
        )
        .map_err(|e| match e {
            ServerError::PortInUse(a) => CliError::PortInUse(a.to_string()),
            ServerError::Io(e) => CliError::Io(e),
        })?;
        let (out, rx) = outbound_queue(OUTBOUND_QUEUE);
        let forwarder = spawn_forwarder(rx, broker.clone());
        let stop = Arc::new(AtomicBool::new(false));
        let clock = Arc::new(Clock::default());
        let dsp = {
            let (stop, clock) = (stop.clone(), clock.clone());
            let (speed, hz) = (opts.speed, opts.telemetry_hz);
            std::thread::Builder::new()
                .name("hush-dsp".into())
                .spawn(move || dsp_loop(sim, source, out, stop, clock, speed, hz))?
        };
        log::info!("serving on tcp {} http {:?}", server.tcp_addr, server.http_addr);
        Ok(Self {
            tcp_addr: server.tcp_addr,
            http_addr: server.http_addr,
            broker,
            clock,
            stop,
            dsp: Some(dsp),
            forwarder: Some(forwarder),
            server: Some(server),
        })
    }

    /// True once the DSP thread has exited, normally or not.
    pub fn is_finished(&self) -> bool {
        self.dsp.as_ref().is_none_or(|h| h.is_finished())
    }

    /// Stops the DSP loop, drains pending output into the broker, flushes
    /// the log and closes every connection.
    pub fn stop(mut self) -> Result<(), CliError> {
        self.stop_now()
    }

    fn stop_now(&mut self) -> Result<(), CliError> {
        self.stop.store(true, Ordering::SeqCst);
        let result = match self.dsp.take() {
            Some(h) => h.join().unwrap_or_else(|_| Err(CliError::Simulation("dsp thread panicked".into()))),
            None => Ok(()),
        };
        if let Some(f) = self.forwarder.take() {
            let _ = f.join();
        }
        self.broker.flush_log()?;
        if let Some(s) = self.server.take() {
            s.shutdown();
        }
        result
    }
}

impl Drop for ServeSession {
    fn drop(&mut self) {
        if let Err(e) = self.stop_now() {
            log::error!("serve shutdown: {e}");
        }
    }
}

fn publish_messages(sim: &mut Simulation, out: &OutboundQueue) {
    for m in sim.drain_messages() {
        let ch = if m.ack { "ack" } else { "event" };
        out.push(format!("unit/{}/{ch}", m.unit), m.payload);
    }
}

fn dsp_loop(
    mut sim: Simulation,
    source: CommandSource,
    out: OutboundQueue,
    stop: Arc<AtomicBool>,
    clock: Arc<Clock>,
    speed: f64,
    telemetry_hz: f64,
) -> Result<(), CliError> {
    let fs = sim.sample_rate() as f64;
    let start = Instant::now();
    let period = Duration::from_secs_f64(1.0 / telemetry_hz);
    let mut next_frame = start + period;
    while !stop.load(Ordering::Relaxed) {
        while let Some(c) = source.poll() {
            sim.submit(c);
        }
        // Commands for idle units apply without waiting for a tick.
        sim.apply_ready();
        publish_messages(&mut sim, &out);

        let target = (start.elapsed().as_secs_f64() * speed * fs) as u64;
        let owed = target.saturating_sub(sim.ticks()).min(MAX_BLOCK);
        for _ in 0..owed {
            sim.tick(None)?;
        }
        clock.ticks.store(sim.ticks(), Ordering::Relaxed);

        let now = Instant::now();
        if now >= next_frame {
            publish_messages(&mut sim, &out);
            for k in 0..sim.units().len() {
                let mut frame = sim.telemetry(k);
                frame.dropped = out.dropped();
                let topic = format!("unit/{}/telemetry", sim.unit(k).id);
                out.push(topic, serde_json::to_value(frame).map_err(CliError::sim)?);
            }
            next_frame += period;
            // After a long stall, resume the cadence rather than bursting.
            if next_frame < now {
                next_frame = now + period;
            }
        }
        if owed == 0 {
            std::thread::sleep(Duration::from_millis(1));
        }
    }
    publish_messages(&mut sim, &out);
    Ok(())
}
