use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::Value;
use tablescope::topics::{validate_payload, Envelope, PayloadError, Topic};
use tokio::sync::{mpsc, Notify};

use crate::HubError;

/// Outbound buffer per client, in envelopes.
pub const DEFAULT_BUFFER: usize = 1000;

#[derive(Debug, Clone)]
pub struct HubConfig {
    pub buffer: usize,
    /// Shared publisher token. `None` disables publishing from remote clients.
    pub token: Option<String>,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self { buffer: DEFAULT_BUFFER, token: None }
    }
}

struct Sub {
    client: u64,
    tx: mpsc::Sender<Arc<str>>,
    kick: Arc<Kick>,
}

#[derive(Default)]
struct TopicState {
    seq: u64,
    retained: Option<Arc<str>>,
    subs: Vec<Sub>,
}

#[derive(Default)]
struct Kick {
    flag: AtomicBool,
    notify: Notify,
}

impl Kick {
    fn fire(&self) {
        self.flag.store(true, Ordering::SeqCst);
        self.notify.notify_one();
    }

    fn fired(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }

    async fn wait(&self) {
        if !self.fired() {
            self.notify.notified().await;
        }
    }
}

struct Inner {
    cfg: HubConfig,
    topics: [Mutex<TopicState>; 5],
    next_client: AtomicU64,
    clients: AtomicU64,
}

/// The topic hub. Cheap to clone; clones share state.
#[derive(Clone)]
pub struct Hub {
    inner: Arc<Inner>,
}

/// Counters for tests and health output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HubStats {
    pub clients: u64,
    pub subscribers: [usize; 5],
    pub seq: [u64; 5],
    pub retained: [bool; 5],
}

impl Hub {
    pub fn new(cfg: HubConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                cfg,
                topics: Default::default(),
                next_client: AtomicU64::new(1),
                clients: AtomicU64::new(0),
            }),
        }
    }

    pub fn config(&self) -> &HubConfig {
        &self.inner.cfg
    }

    fn topic(&self, t: Topic) -> MutexGuard<'_, TopicState> {
        // a panic while holding the lock cannot leave a torn TopicState
        self.inner.topics[t.index()].lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn authorized(&self, token: Option<&str>) -> bool {
        matches!((&self.inner.cfg.token, token), (Some(want), Some(got)) if want == got)
    }

    /// Validate, sequence, retain and fan out. Returns the new seq.
    pub fn publish(&self, topic: Topic, payload: Value) -> Result<u64, PayloadError> {
        validate_payload(topic, &payload)?;
        let mut t = self.topic(topic);
        let seq = t.seq + 1;
        let env = Envelope { topic, seq, ts: now_ms(), payload };
        let text: Arc<str> = serde_json::to_string(&env).expect("envelope serializes").into();
        t.seq = seq;
        t.retained = Some(text.clone());
        t.subs.retain(|s| {
            if s.kick.fired() {
                return false;
            }
            match s.tx.try_send(text.clone()) {
                Ok(()) => true,
                Err(mpsc::error::TrySendError::Full(_)) => {
                    tracing::warn!(client = s.client, topic = topic.name(), "outbound buffer full; disconnecting");
                    s.kick.fire();
                    false
                }
                Err(mpsc::error::TrySendError::Closed(_)) => false,
            }
        });
        Ok(seq)
    }

    /// Register a client. Dropping the [`Client`] unsubscribes it everywhere.
    pub fn connect(&self) -> Client {
        let id = self.inner.next_client.fetch_add(1, Ordering::Relaxed);
        self.inner.clients.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel(self.inner.cfg.buffer.max(1));
        Client { hub: self.clone(), id, tx, rx, kick: Arc::new(Kick::default()) }
    }

    pub fn snapshot(&self, topic: Topic) -> Option<Arc<str>> {
        self.topic(topic).retained.clone()
    }

    pub fn stats(&self) -> HubStats {
        let mut s = HubStats {
            clients: self.inner.clients.load(Ordering::SeqCst),
            subscribers: [0; 5],
            seq: [0; 5],
            retained: [false; 5],
        };
        for t in Topic::ALL {
            let g = self.topic(t);
            let i = t.index();
            s.subscribers[i] = g.subs.iter().filter(|x| !x.kick.fired()).count();
            s.seq[i] = g.seq;
            s.retained[i] = g.retained.is_some();
        }
        s
    }

    fn drop_client(&self, id: u64) {
        for t in Topic::ALL {
            self.topic(t).subs.retain(|s| s.client != id);
        }
        self.inner.clients.fetch_sub(1, Ordering::SeqCst);
    }
}

/// One subscriber's end: a bounded FIFO of serialized envelopes.
pub struct Client {
    hub: Hub,
    id: u64,
    tx: mpsc::Sender<Arc<str>>,
    rx: mpsc::Receiver<Arc<str>>,
    kick: Arc<Kick>,
}

impl Client {
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Subscribe; the retained snapshot, if any, is queued first.
    pub fn subscribe(&self, topic: Topic) -> Result<(), HubError> {
        if self.kick.fired() {
            return Err(HubError::Disconnected);
        }
        let mut t = self.hub.topic(topic);
        if t.subs.iter().any(|s| s.client == self.id) {
            return Ok(());
        }
        if let Some(snap) = &t.retained {
            if self.tx.try_send(snap.clone()).is_err() {
                self.kick.fire();
                return Err(HubError::Disconnected);
            }
        }
        t.subs.push(Sub { client: self.id, tx: self.tx.clone(), kick: self.kick.clone() });
        Ok(())
    }

    pub fn unsubscribe(&self, topic: Topic) {
        self.hub.topic(topic).subs.retain(|s| s.client != self.id);
    }

    /// Next envelope; `None` once the hub has cut this client off.
    pub async fn recv(&mut self) -> Option<Arc<str>> {
        tokio::select! {
            biased;
            m = self.rx.recv() => m,
            _ = self.kick.wait() => None,
        }
    }

    pub fn try_recv(&mut self) -> Option<Arc<str>> {
        if self.kick.fired() {
            return None;
        }
        self.rx.try_recv().ok()
    }

    pub fn is_kicked(&self) -> bool {
        self.kick.fired()
    }
}

impl Drop for Client {
    fn drop(&mut self) {
        self.hub.drop_client(self.id);
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}
