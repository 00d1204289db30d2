use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopicError {
    #[error("malformed topic {0:?}")]
    Malformed(String),
    #[error("malformed topic filter {0:?}")]
    MalformedFilter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Cmd,
    Telemetry,
    Ack,
    Event,
}

impl Channel {
    fn as_str(self) -> &'static str {
        match self {
            Channel::Cmd => "cmd",
            Channel::Telemetry => "telemetry",
            Channel::Ack => "ack",
            Channel::Event => "event",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BrokerTopic {
    Hello,
    Subscribe,
    /// Connection-level errors, sent only to the offending connection.
    Error,
}

/// A concrete topic: `unit/<id>/<channel>` or `broker/<name>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Topic {
    Unit { id: String, channel: Channel },
    Broker(BrokerTopic),
}

impl Topic {
    pub fn unit(id: impl Into<String>, channel: Channel) -> Self {
        Topic::Unit {
            id: id.into(),
            channel,
        }
    }
}

fn valid_segment(s: &str) -> bool {
    !s.is_empty() && !s.contains(['#', '+', '/']) && !s.chars().any(char::is_control)
}

impl FromStr for Topic {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TopicError::Malformed(s.to_string());
        let parts: Vec<&str> = s.split('/').collect();
        match parts.as_slice() {
            ["unit", id, ch] if valid_segment(id) => {
                let channel = match *ch {
                    "cmd" => Channel::Cmd,
                    "telemetry" => Channel::Telemetry,
                    "ack" => Channel::Ack,
                    "event" => Channel::Event,
                    _ => return Err(bad()),
                };
                Ok(Topic::unit(*id, channel))
            }
            ["broker", "hello"] => Ok(Topic::Broker(BrokerTopic::Hello)),
            ["broker", "subscribe"] => Ok(Topic::Broker(BrokerTopic::Subscribe)),
            ["broker", "error"] => Ok(Topic::Broker(BrokerTopic::Error)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topic::Unit { id, channel } => write!(f, "unit/{id}/{}", channel.as_str()),
            Topic::Broker(b) => f.write_str(match b {
                BrokerTopic::Hello => "broker/hello",
                BrokerTopic::Subscribe => "broker/subscribe",
                BrokerTopic::Error => "broker/error",
            }),
        }
    }
}

/// Subscription filter: an exact topic, or a prefix followed by a
/// multi-level `#` wildcard (`unit/#`, `#`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicFilter {
    prefix: Vec<String>,
    wildcard: bool,
}

impl TopicFilter {
    pub fn parse(s: &str) -> Result<Self, TopicError> {
        let bad = || TopicError::MalformedFilter(s.to_string());
        let mut prefix: Vec<String> = s.split('/').map(str::to_string).collect();
        let wildcard = prefix.last().is_some_and(|l| l == "#");
        if wildcard {
            prefix.pop();
        }
        if prefix.iter().any(|p| !valid_segment(p)) || (!wildcard && prefix.is_empty()) {
            return Err(bad());
        }
        if !wildcard {
            s.parse::<Topic>().map_err(|_| bad())?;
        }
        Ok(Self { prefix, wildcard })
    }

    pub fn matches(&self, topic: &str) -> bool {
        let mut levels = topic.split('/');
        for p in &self.prefix {
            match levels.next() {
                Some(l) if l == p => {}
                _ => return false,
            }
        }
        self.wildcard || levels.next().is_none()
    }
}

impl fmt::Display for TopicFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = self.prefix.clone();
        if self.wildcard {
            parts.push("#".into());
        }
        f.write_str(&parts.join("/"))
    }
}
