use std::net::SocketAddr;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tablescope::topics::{ClientFrame, ReplyFrame, Topic};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::protocol::WebSocketConfig;
use tokio_tungstenite::tungstenite::Message;

use crate::{Hub, HubError};

const MAX_FRAME: usize = 1 << 20;

/// A session command received over the wire, with a slot for the verdict
/// (`Ok(seq)` or an error message).
#[derive(Debug)]
pub struct CommandRequest {
    pub command: Value,
    pub reply: oneshot::Sender<Result<u64, String>>,
}

pub type CommandSink = mpsc::Sender<CommandRequest>;

pub struct ServerHandle {
    addr: SocketAddr,
    stop: watch::Sender<bool>,
    join: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting and close every connection.
    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        let _ = self.join.await;
    }
}

/// Bind `addr` and serve the hub until shut down.
pub async fn serve(addr: &str, hub: Hub, commands: Option<CommandSink>) -> Result<ServerHandle, HubError> {
    let listener = TcpListener::bind(addr).await.map_err(|e| HubError::Bind(addr.to_string(), e))?;
    let addr = listener.local_addr().map_err(|e| HubError::Bind(addr.to_string(), e))?;
    let (stop, stop_rx) = watch::channel(false);
    let join = tokio::spawn(accept_loop(listener, hub, commands, stop_rx));
    tracing::info!(%addr, "hub listening");
    Ok(ServerHandle { addr, stop, join })
}

async fn accept_loop(listener: TcpListener, hub: Hub, commands: Option<CommandSink>, mut stop: watch::Receiver<bool>) {
    let mut conns = tokio::task::JoinSet::new();
    loop {
        tokio::select! {
            _ = stop.changed() => break,
            r = listener.accept() => match r {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    conns.spawn(connection(stream, peer, hub.clone(), commands.clone(), stop.clone()));
                }
                Err(e) => tracing::warn!("accept failed: {e}"),
            },
            Some(_) = conns.join_next(), if !conns.is_empty() => {}
        }
    }
    while conns.join_next().await.is_some() {}
}

fn reply(r: ReplyFrame) -> Message {
    Message::Text(serde_json::to_string(&r).expect("reply serializes"))
}

fn error(msg: impl Into<String>) -> Message {
    reply(ReplyFrame::Error { error: msg.into() })
}

async fn connection(
    stream: TcpStream,
    peer: SocketAddr,
    hub: Hub,
    commands: Option<CommandSink>,
    mut stop: watch::Receiver<bool>,
) {
    let mut cfg = WebSocketConfig::default();
    cfg.max_message_size = Some(MAX_FRAME);
    cfg.max_frame_size = Some(MAX_FRAME);
    let ws = match tokio_tungstenite::accept_async_with_config(stream, Some(cfg)).await {
        Ok(ws) => ws,
        Err(e) => {
            tracing::debug!(%peer, "handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let mut client = hub.connect();
    tracing::debug!(%peer, client = client.id(), "connected");
    loop {
        let out = tokio::select! {
            _ = stop.changed() => break,
            m = client.recv() => match m {
                Some(text) => Message::Text(text.to_string()),
                None => {
                    let _ = sink.send(error("outbound buffer overflow; disconnected")).await;
                    break;
                }
            },
            frame = source.next() => match frame {
                Some(Ok(Message::Text(t))) => match handle(&t, &hub, &client, commands.as_ref()).await {
                    Some(m) => m,
                    None => continue,
                },
                Some(Ok(Message::Binary(_))) => error("binary frames are not supported"),
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => continue,
                Some(Err(e)) => {
                    tracing::debug!(%peer, "read failed: {e}");
                    break;
                }
            },
        };
        if sink.send(out).await.is_err() {
            break;
        }
    }
    let _ = sink.close().await;
    tracing::debug!(%peer, client = client.id(), "disconnected");
}

async fn handle(text: &str, hub: &Hub, client: &crate::Client, commands: Option<&CommandSink>) -> Option<Message> {
    let frame: ClientFrame = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => return Some(error(format!("malformed frame: {e}"))),
    };
    let topic = |name: &str| name.parse::<Topic>().map_err(|e| error(e.to_string()));
    match frame {
        ClientFrame::Subscribe { topic: name } => match topic(&name) {
            Ok(t) => client.subscribe(t).err().map(|e| error(e.to_string())),
            Err(m) => Some(m),
        },
        ClientFrame::Unsubscribe { topic: name } => match topic(&name) {
            Ok(t) => {
                client.unsubscribe(t);
                None
            }
            Err(m) => Some(m),
        },
        ClientFrame::Publish { topic: name, payload, token } => {
            let t = match topic(&name) {
                Ok(t) => t,
                Err(m) => return Some(m),
            };
            if !hub.authorized(token.as_deref()) {
                return Some(error("publish not authorized"));
            }
            Some(match hub.publish(t, payload) {
                Ok(seq) => reply(ReplyFrame::Ack { ack: name, seq }),
                Err(e) => error(e.to_string()),
            })
        }
        ClientFrame::Command { command, token } => {
            if !hub.authorized(token.as_deref()) {
                return Some(error("command not authorized"));
            }
            let Some(sink) = commands else {
                return Some(error("no session engine behind this hub"));
            };
            let (tx, rx) = oneshot::channel();
            if sink.send(CommandRequest { command, reply: tx }).await.is_err() {
                return Some(error("session engine stopped"));
            }
            Some(match rx.await {
                Ok(Ok(seq)) => reply(ReplyFrame::Ack { ack: "command".into(), seq }),
                Ok(Err(e)) => error(e),
                Err(_) => error("session engine stopped"),
            })
        }
    }
}
