use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Wire message. One JSON object per line on every transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub topic: String,
    pub seq: u64,
    pub payload: Value,
}

impl Envelope {
    pub fn new(topic: impl Into<String>, seq: u64, payload: Value) -> Self {
        Self {
            topic: topic.into(),
            seq,
            payload,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelope serialization is infallible")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
