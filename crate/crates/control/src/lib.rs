//! Remote management for hush units.
//!
//! A small topic broker routes JSON envelopes between network clients and
//! the simulation. Topics are `unit/<id>/{cmd,telemetry,ack,event}` plus
//! `broker/{hello,subscribe,error}`. Subscriptions take exact topics or a
//! trailing `#` wildcard; delivery is at most once.
//!
//! The DSP loop talks to the network side only through two bounded queues
//! (see [`link`]) and applies commands at frame boundaries.

pub mod broker;
pub mod envelope;
pub mod link;
pub mod replay;
pub mod server;
pub mod state;
pub mod telemetry;
pub mod topic;

pub use broker::{Broker, Delivery, Subscription};
pub use envelope::Envelope;
pub use link::{command_queue, outbound_queue, spawn_forwarder, CommandSink, CommandSource, InboundCommand, OutboundQueue};
pub use replay::{replay_log, Replay};
pub use server::{ServerConfig, ServerError, ServerHandle, DEFAULT_HTTP_PORT, DEFAULT_TCP_PORT};
pub use state::{Command, Effect, ModeRequest, ParamUpdate, Rejection, UnitState, UnitStateMachine};
pub use telemetry::TelemetryFrame;
pub use topic::{Channel, Topic, TopicError, TopicFilter};
