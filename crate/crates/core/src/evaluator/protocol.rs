//! Line-delimited JSON records exchanged with an external evaluator.

use serde::{Deserialize, Serialize};

use crate::search_space::Genome;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        version: u32,
    },
    Eval {
        id: u64,
        genome: Genome,
        input: [u32; 4],
        calibrate: bool,
    },
    Result {
        id: u64,
        score: f64,
        #[serde(default)]
        latency_ms: Option<f64>,
        #[serde(default)]
        peak_mem_mb: Option<f64>,
    },
    Shutdown,
}

impl Message {
    pub fn hello() -> Self {
        Message::Hello {
            version: PROTOCOL_VERSION,
        }
    }

    /// One line, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim())
    }
}
