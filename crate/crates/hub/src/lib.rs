//! Topic hub for the workshop displays.
//!
//! Five fixed topics, each with a per-topic sequence number and a retained
//! last envelope that late subscribers receive first. Publishes to one topic
//! are serialized under that topic's lock, so every subscriber sees the same
//! gapless ascending run; nothing is promised across topics. Each client has
//! one bounded outbound queue and is cut off when it fills.
//!
//! [`serve`] puts the hub on a WebSocket endpoint speaking JSON text frames:
//!
//! ```text
//! -> {"op":"subscribe","topic":"global_stats"}
//! -> {"op":"publish","topic":"global_stats","payload":{"remaining":19500,"proposed":500},"token":"..."}
//! <- {"topic":"global_stats","seq":1,"ts":1700000000000,"payload":{"remaining":19500,"proposed":500}}
//! <- {"ack":"global_stats","seq":1}
//! -> {"op":"subscribe","topic":"weather"}
//! <- {"error":"unknown topic \"weather\""}
//! ```

mod hub;
mod server;

pub use hub::{Client, Hub, HubConfig, HubStats, DEFAULT_BUFFER};
pub use server::{serve, CommandRequest, CommandSink, ServerHandle};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HubError {
    #[error("cannot bind {0}: {1}")]
    Bind(String, #[source] std::io::Error),
    #[error("client was disconnected")]
    Disconnected,
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/hub.md")]
    mod hub {}
}
