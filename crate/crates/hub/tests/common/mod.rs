#![allow(dead_code)]

use serde_json::{json, Value};
use tablescope::topics::Topic;

/// A schema-valid payload for `topic`, varied by `n`.
pub fn payload(topic: Topic, n: u64) -> Value {
    match topic {
        Topic::MapExtents => json!({"station": "district", "extent": {"min": [0, 0], "max": [400 + n, 400]}}),
        Topic::GlobalStats => json!({"remaining": 20000 - n as i64, "proposed": n}),
        Topic::DistrictState => json!({"district_id": "d1", "station": "neighborhood", "proposed": n}),
        Topic::Proposals => json!({"active": [], "changes": []}),
        Topic::ParcelDetail => json!({"kind": "no_parcel", "message": format!("probe {n}")}),
    }
}

pub fn seq_of(text: &str) -> (String, u64) {
    let v: Value = serde_json::from_str(text).unwrap();
    (v["topic"].as_str().unwrap().to_string(), v["seq"].as_u64().unwrap())
}

use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub struct Ws(pub WebSocketStream<MaybeTlsStream<TcpStream>>);

impl Ws {
    pub async fn connect(addr: std::net::SocketAddr) -> Ws {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await.unwrap();
        Ws(ws)
    }

    pub async fn send(&mut self, v: Value) {
        self.0.send(Message::Text(v.to_string())).await.unwrap();
    }

    /// Next text frame as JSON, or `None` on close or after 5 s.
    pub async fn next(&mut self) -> Option<Value> {
        loop {
            let m = tokio::time::timeout(std::time::Duration::from_secs(5), self.0.next()).await.ok()??;
            match m.ok()? {
                Message::Text(t) => return Some(serde_json::from_str(&t).unwrap()),
                Message::Close(_) => return None,
                _ => continue,
            }
        }
    }

    /// True when nothing arrives within `ms`.
    pub async fn quiet(&mut self, ms: u64) -> bool {
        tokio::time::timeout(std::time::Duration::from_millis(ms), self.0.next()).await.is_err()
    }
}
