use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::Value;
use tokio::sync::mpsc;

use crate::envelope::Envelope;
use crate::topic::{BrokerTopic, Topic, TopicError, TopicFilter};

pub type SubscriberId = u64;

/// Serialized envelope line, shared between all receivers.
pub type Line = Arc<str>;

struct Subscriber {
    id: SubscriberId,
    filters: Vec<TopicFilter>,
    tx: mpsc::Sender<Line>,
    dropped: Arc<AtomicU64>,
}

struct EventLog {
    lines: VecDeque<(u64, Line)>,
    capacity: usize,
    file: Option<BufWriter<File>>,
}

struct Inner {
    next_seq: u64,
    next_id: SubscriberId,
    subscribers: Vec<Subscriber>,
    log: EventLog,
}

/// Receiving half of a broker connection.
pub struct Subscription {
    pub id: SubscriberId,
    pub rx: mpsc::Receiver<Line>,
    dropped: Arc<AtomicU64>,
}

impl Subscription {
    /// Lines discarded because this subscriber's queue was full.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub seq: u64,
    pub delivered: usize,
    pub dropped: usize,
}

/// Topic router with at-most-once delivery into bounded per-subscriber
/// queues. The broker stamps every outgoing envelope with its own sequence
/// number, so each connection sees a strictly increasing `seq`.
pub struct Broker {
    inner: Mutex<Inner>,
    queue_len: usize,
}

impl Broker {
    pub fn new(queue_len: usize) -> Self {
        Self::with_log_capacity(queue_len, 200_000)
    }

    pub fn with_log_capacity(queue_len: usize, log_capacity: usize) -> Self {
        Self {
            inner: Mutex::new(Inner {
                next_seq: 1,
                next_id: 1,
                subscribers: Vec::new(),
                log: EventLog {
                    lines: VecDeque::new(),
                    capacity: log_capacity,
                    file: None,
                },
            }),
            queue_len: queue_len.max(1),
        }
    }

    /// Also append every published envelope to `path`.
    pub fn log_to_file(&self, path: &Path) -> std::io::Result<()> {
        let f = BufWriter::new(File::create(path)?);
        self.lock().log.file = Some(f);
        Ok(())
    }

    pub fn flush_log(&self) -> std::io::Result<()> {
        match self.lock().log.file.as_mut() {
            Some(f) => f.flush(),
            None => Ok(()),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn connect(&self) -> Subscription {
        let (tx, rx) = mpsc::channel(self.queue_len);
        let dropped = Arc::new(AtomicU64::new(0));
        let mut g = self.lock();
        let id = g.next_id;
        g.next_id += 1;
        g.subscribers.push(Subscriber {
            id,
            filters: Vec::new(),
            tx,
            dropped: dropped.clone(),
        });
        Subscription { id, rx, dropped }
    }

    pub fn disconnect(&self, id: SubscriberId) {
        self.lock().subscribers.retain(|s| s.id != id);
    }

    pub fn subscribe(&self, id: SubscriberId, filter: &str) -> Result<(), TopicError> {
        let f = TopicFilter::parse(filter)?;
        let mut g = self.lock();
        if let Some(s) = g.subscribers.iter_mut().find(|s| s.id == id) {
            if !s.filters.contains(&f) {
                s.filters.push(f);
            }
        }
        Ok(())
    }

    pub fn subscriber_count(&self) -> usize {
        self.lock().subscribers.len()
    }

    /// Routes to every subscriber with a matching filter and records the
    /// envelope in the event log.
    pub fn publish(&self, topic: &str, payload: Value) -> Result<Delivery, TopicError> {
        topic.parse::<Topic>()?;
        let mut g = self.lock();
        let seq = g.next_seq;
        g.next_seq += 1;
        let line: Line = Envelope::new(topic, seq, payload).to_line().into();
        let (mut delivered, mut dropped) = (0, 0);
        g.subscribers.retain(|s| {
            if !s.filters.iter().any(|f| f.matches(topic)) {
                return true;
            }
            match s.tx.try_send(line.clone()) {
                Ok(()) => {
                    delivered += 1;
                    true
                }
                Err(mpsc::error::TrySendError::Full(_)) => {
                    s.dropped.fetch_add(1, Ordering::Relaxed);
                    dropped += 1;
                    true
                }
                Err(mpsc::error::TrySendError::Closed(_)) => false,
            }
        });
        let log = &mut g.log;
        if let Some(f) = log.file.as_mut() {
            if let Err(e) = writeln!(f, "{line}") {
                log::warn!("event log write failed: {e}");
            }
        }
        if log.capacity > 0 {
            if log.lines.len() == log.capacity {
                log.lines.pop_front();
            }
            log.lines.push_back((seq, line));
        }
        Ok(Delivery {
            seq,
            delivered,
            dropped,
        })
    }

    /// Sends a broker-topic envelope to one connection only; not logged.
    pub fn send_to(&self, id: SubscriberId, topic: BrokerTopic, payload: Value) -> bool {
        let mut g = self.lock();
        let seq = g.next_seq;
        g.next_seq += 1;
        let line: Line = Envelope::new(Topic::Broker(topic).to_string(), seq, payload)
            .to_line()
            .into();
        match g.subscribers.iter().find(|s| s.id == id) {
            Some(s) => match s.tx.try_send(line) {
                Ok(()) => true,
                Err(_) => {
                    s.dropped.fetch_add(1, Ordering::Relaxed);
                    false
                }
            },
            None => false,
        }
    }

    /// Logged lines with `seq > since`, oldest first.
    pub fn log_since(&self, since: u64) -> Vec<Line> {
        self.lock()
            .log
            .lines
            .iter()
            .filter(|(s, _)| *s > since)
            .map(|(_, l)| l.clone())
            .collect()
    }
}
