//! The two bounded one-way queues between the network side and the DSP
//! loop. The DSP side never blocks: commands are polled and outbound
//! messages are dropped (and counted) when the queue is full.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, SyncSender, TryRecvError, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;

use crate::broker::Broker;

/// A command as received from a client.
#[derive(Debug, Clone, PartialEq)]
pub struct InboundCommand {
    pub unit: String,
    /// Connection the command came from.
    pub client: u64,
    /// The client's envelope sequence number.
    pub seq: u64,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub topic: String,
    pub payload: Value,
}

#[derive(Clone)]
pub struct CommandSink {
    tx: SyncSender<InboundCommand>,
}

impl CommandSink {
    /// Returns the command back if the queue is full or the DSP loop is gone.
    pub fn try_send(&self, cmd: InboundCommand) -> Result<(), InboundCommand> {
        self.tx.try_send(cmd).map_err(|e| match e {
            TrySendError::Full(c) | TrySendError::Disconnected(c) => c,
        })
    }
}

pub struct CommandSource {
    rx: Receiver<InboundCommand>,
}

impl CommandSource {
    pub fn poll(&self) -> Option<InboundCommand> {
        match self.rx.try_recv() {
            Ok(c) => Some(c),
            Err(TryRecvError::Empty | TryRecvError::Disconnected) => None,
        }
    }
}

#[derive(Clone)]
pub struct OutboundQueue {
    tx: SyncSender<Outbound>,
    dropped: Arc<AtomicU64>,
}

impl OutboundQueue {
    pub fn push(&self, topic: impl Into<String>, payload: Value) -> bool {
        match self.tx.try_send(Outbound {
            topic: topic.into(),
            payload,
        }) {
            Ok(()) => true,
            Err(_) => {
                self.dropped.fetch_add(1, Ordering::Relaxed);
                false
            }
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

pub fn command_queue(capacity: usize) -> (CommandSink, CommandSource) {
    let (tx, rx) = mpsc::sync_channel(capacity);
    (CommandSink { tx }, CommandSource { rx })
}

pub fn outbound_queue(capacity: usize) -> (OutboundQueue, Receiver<Outbound>) {
    let (tx, rx) = mpsc::sync_channel(capacity);
    (
        OutboundQueue {
            tx,
            dropped: Arc::new(AtomicU64::new(0)),
        },
        rx,
    )
}

/// Publishes everything the DSP loop emits until all queue senders are gone.
pub fn spawn_forwarder(rx: Receiver<Outbound>, broker: Arc<Broker>) -> JoinHandle<()> {
    std::thread::Builder::new()
        .name("hush-forward".into())
        .spawn(move || {
            for o in rx {
                if let Err(e) = broker.publish(&o.topic, o.payload) {
                    log::warn!("dropping outbound message: {e}");
                }
            }
            let _ = broker.flush_log();
        })
        .expect("spawn forwarder thread")
}
