use std::io::BufRead;

use crate::envelope::Envelope;
use crate::telemetry::TelemetryFrame;
use crate::topic::{Channel, Topic};

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub unit: String,
    pub seq: u64,
    pub frame: TelemetryFrame,
}

/// Event log parsed back into envelopes and a telemetry timeline.
#[derive(Debug, Default)]
pub struct Replay {
    pub envelopes: Vec<Envelope>,
    pub timeline: Vec<TimelineEntry>,
    /// Lines that were not valid envelopes, including a torn final line.
    pub skipped: usize,
}

impl Replay {
    pub fn frames_for<'a>(&'a self, unit: &'a str) -> impl Iterator<Item = &'a TimelineEntry> + 'a {
        self.timeline.iter().filter(move |e| e.unit == unit)
    }

    /// Re-serializes every accepted envelope, one per line.
    pub fn to_ndjson(&self) -> String {
        let mut s = String::new();
        for e in &self.envelopes {
            s.push_str(&e.to_line());
            s.push('\n');
        }
        s
    }
}

pub fn replay_log<R: BufRead>(reader: R) -> std::io::Result<Replay> {
    let mut r = Replay::default();
    for line in reader.split(b'\n') {
        let line = line?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let Some(env) = std::str::from_utf8(&line).ok().and_then(|l| Envelope::from_line(l).ok()) else {
            r.skipped += 1;
            continue;
        };
        if let Ok(Topic::Unit {
            id,
            channel: Channel::Telemetry,
        }) = env.topic.parse::<Topic>()
        {
            match serde_json::from_value::<TelemetryFrame>(env.payload.clone()) {
                Ok(frame) => r.timeline.push(TimelineEntry {
                    unit: id,
                    seq: env.seq,
                    frame,
                }),
                Err(_) => {
                    r.skipped += 1;
                    continue;
                }
            }
        }
        r.envelopes.push(env);
    }
    Ok(r)
}
