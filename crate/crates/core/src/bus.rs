//! In-process publish/subscribe bus with MQTT-style topic families.
//!
//! Every topic keeps its own monotone sequence counter. Each subscriber owns
//! a bounded queue; what happens when that queue is full depends on the
//! topic family:
//!
//! * `monitor/logs` drops the oldest queued envelope.
//! * detection-path topics (`chunk/*`, `scores/*`, `anomalies`, `actions`)
//!   never block the publisher. The queue grows past its soft capacity and
//!   the overflow is counted.
//! * `policy/updates` is the cloud-tier topic. [`Bus::publish`] treats it
//!   like a detection topic, while [`Bus::publish_blocking`] waits for space.
//!
//! Timestamps are logical ticks supplied by the bus clock, so traces replay
//! identically.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum BusError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("payload serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("trace file: {0}")]
    Io(#[from] std::io::Error),
    #[error("timed out waiting for queue space on `{0}`")]
    Timeout(String),
}

/// Stream identifier for `chunk/stream{1,2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StreamId {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreSource {
    If,
    Lstm,
}

/// The registered topic set. Anything else fails to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topic {
    Chunk(StreamId),
    Scores(ScoreSource),
    Anomalies,
    Actions,
    PolicyUpdates,
    MonitorLogs,
}

impl Topic {
    pub const ALL: [Topic; 8] = [
        Topic::Chunk(StreamId::One),
        Topic::Chunk(StreamId::Two),
        Topic::Scores(ScoreSource::If),
        Topic::Scores(ScoreSource::Lstm),
        Topic::Anomalies,
        Topic::Actions,
        Topic::PolicyUpdates,
        Topic::MonitorLogs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Topic::Chunk(StreamId::One) => "chunk/stream1",
            Topic::Chunk(StreamId::Two) => "chunk/stream2",
            Topic::Scores(ScoreSource::If) => "scores/if",
            Topic::Scores(ScoreSource::Lstm) => "scores/lstm",
            Topic::Anomalies => "anomalies",
            Topic::Actions => "actions",
            Topic::PolicyUpdates => "policy/updates",
            Topic::MonitorLogs => "monitor/logs",
        }
    }

    /// Topics on the Edge -> Fog -> external detection path.
    pub fn is_detection_path(&self) -> bool {
        matches!(self, Topic::Chunk(_) | Topic::Scores(_) | Topic::Anomalies | Topic::Actions)
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topic {
    type Err = BusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topic::ALL.iter().copied().find(|t| t.name() == s).ok_or_else(|| BusError::UnknownTopic(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub topic: Topic,
    pub seq: u64,
    pub timestamp: u64,
    pub payload: Value,
}

impl Envelope {
    pub fn decode<T: for<'de> Deserialize<'de>>(&self) -> Result<T, BusError> {
        Ok(serde_json::from_value(self.payload.clone())?)
    }
}

#[derive(Debug, Default)]
struct QueueState {
    items: VecDeque<Envelope>,
    dropped: u64,
    overflowed: u64,
    closed: bool,
}

#[derive(Debug)]
struct SubscriberQueue {
    topic: Topic,
    capacity: usize,
    state: Mutex<QueueState>,
    ready: Condvar,
    space: Condvar,
}

impl SubscriberQueue {
    fn push_nonblocking(&self, env: Envelope) {
        let mut st = self.state.lock().expect("bus queue poisoned");
        if st.items.len() >= self.capacity {
            if self.topic == Topic::MonitorLogs {
                st.items.pop_front();
                st.dropped += 1;
            } else {
                st.overflowed += 1;
            }
        }
        st.items.push_back(env);
        drop(st);
        self.ready.notify_all();
    }

    fn push_blocking(&self, env: Envelope, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut st = self.state.lock().expect("bus queue poisoned");
        while st.items.len() >= self.capacity && !st.closed {
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            st = self.space.wait_timeout(st, deadline - now).expect("bus queue poisoned").0;
        }
        st.items.push_back(env);
        drop(st);
        self.ready.notify_all();
        true
    }
}

#[derive(Default)]
struct Registry {
    seqs: HashMap<Topic, u64>,
    subscribers: HashMap<Topic, Vec<Arc<SubscriberQueue>>>,
}

struct BusInner {
    registry: Mutex<Registry>,
    clock: AtomicU64,
    capacity: usize,
    trace: Option<Mutex<BufWriter<File>>>,
}

/// Cloneable handle to a shared bus.
#[derive(Clone)]
pub struct Bus {
    inner: Arc<BusInner>,
}

impl fmt::Debug for Bus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bus").field("capacity", &self.inner.capacity).field("tick", &self.tick()).finish()
    }
}

pub const DEFAULT_QUEUE_CAPACITY: usize = 4096;

impl Default for Bus {
    fn default() -> Self {
        Self::new(DEFAULT_QUEUE_CAPACITY)
    }
}

impl Bus {
    pub fn new(queue_capacity: usize) -> Self {
        Self {
            inner: Arc::new(BusInner {
                registry: Mutex::new(Registry::default()),
                clock: AtomicU64::new(0),
                capacity: queue_capacity.max(1),
                trace: None,
            }),
        }
    }

    /// Bus that also appends every published envelope to an NDJSON file.
    pub fn with_trace(queue_capacity: usize, path: impl AsRef<Path>) -> Result<Self, BusError> {
        let file = File::create(path)?;
        Ok(Self {
            inner: Arc::new(BusInner {
                registry: Mutex::new(Registry::default()),
                clock: AtomicU64::new(0),
                capacity: queue_capacity.max(1),
                trace: Some(Mutex::new(BufWriter::new(file))),
            }),
        })
    }

    pub fn tick(&self) -> u64 {
        self.inner.clock.load(Ordering::SeqCst)
    }

    pub fn set_tick(&self, tick: u64) {
        self.inner.clock.store(tick, Ordering::SeqCst);
    }

    pub fn subscribe(&self, topic: &str) -> Result<Subscription, BusError> {
        let topic: Topic = topic.parse()?;
        Ok(self.subscribe_topic(topic))
    }

    pub fn subscribe_topic(&self, topic: Topic) -> Subscription {
        let queue = Arc::new(SubscriberQueue {
            topic,
            capacity: self.inner.capacity,
            state: Mutex::new(QueueState::default()),
            ready: Condvar::new(),
            space: Condvar::new(),
        });
        self.inner
            .registry
            .lock()
            .expect("bus registry poisoned")
            .subscribers
            .entry(topic)
            .or_default()
            .push(Arc::clone(&queue));
        Subscription { queue }
    }

    /// Publish by topic name. Never blocks on subscribers.
    pub fn publish<T: Serialize>(&self, topic: &str, payload: &T) -> Result<u64, BusError> {
        let topic: Topic = topic.parse()?;
        self.publish_topic(topic, payload)
    }

    pub fn publish_topic<T: Serialize>(&self, topic: Topic, payload: &T) -> Result<u64, BusError> {
        let payload = serde_json::to_value(payload)?;
        let (env, _) = self.stamp(topic, payload, false)?;
        Ok(env.seq)
    }

    /// Cloud-tier publish: waits (up to `timeout`) for space in each
    /// subscriber queue. Detection-path and log topics are routed to the
    /// non-blocking path regardless.
    pub fn publish_blocking<T: Serialize>(
        &self,
        topic: Topic,
        payload: &T,
        timeout: Duration,
    ) -> Result<u64, BusError> {
        let blocking = !(topic.is_detection_path() || topic == Topic::MonitorLogs);
        let payload = serde_json::to_value(payload)?;
        let (env, pending) = self.stamp(topic, payload, blocking)?;
        for q in &pending {
            if !q.push_blocking(env.clone(), timeout) {
                return Err(BusError::Timeout(topic.to_string()));
            }
        }
        Ok(env.seq)
    }

    // seq assignment, tracing and non-blocking enqueue happen under one lock
    // so per-topic order is identical for every subscriber and the trace
    fn stamp(
        &self,
        topic: Topic,
        payload: Value,
        blocking: bool,
    ) -> Result<(Envelope, Vec<Arc<SubscriberQueue>>), BusError> {
        let mut reg = self.inner.registry.lock().expect("bus registry poisoned");
        let seq = reg.seqs.entry(topic).or_insert(0);
        *seq += 1;
        let env = Envelope { topic, seq: *seq, timestamp: self.tick(), payload };
        self.trace(&env)?;
        let queues = reg.subscribers.get(&topic).cloned().unwrap_or_default();
        if blocking {
            return Ok((env, queues));
        }
        for q in &queues {
            q.push_nonblocking(env.clone());
        }
        Ok((env, Vec::new()))
    }

    fn trace(&self, env: &Envelope) -> Result<(), BusError> {
        if let Some(trace) = &self.inner.trace {
            let mut w = trace.lock().expect("trace writer poisoned");
            serde_json::to_writer(&mut *w, env)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn flush_trace(&self) -> Result<(), BusError> {
        if let Some(trace) = &self.inner.trace {
            trace.lock().expect("trace writer poisoned").flush()?;
        }
        Ok(())
    }

    /// Last sequence number issued on `topic` (0 if none).
    pub fn last_seq(&self, topic: Topic) -> u64 {
        self.inner.registry.lock().expect("bus registry poisoned").seqs.get(&topic).copied().unwrap_or(0)
    }

    /// Wakes every blocked receiver; subsequent `recv` calls return `None`
    /// once their queue drains.
    pub fn close(&self) {
        let reg = self.inner.registry.lock().expect("bus registry poisoned");
        for q in reg.subscribers.values().flatten() {
            q.state.lock().expect("bus queue poisoned").closed = true;
            q.ready.notify_all();
            q.space.notify_all();
        }
    }
}

/// Receiving end of one subscription.
#[derive(Debug)]
pub struct Subscription {
    queue: Arc<SubscriberQueue>,
}

impl Subscription {
    pub fn topic(&self) -> Topic {
        self.queue.topic
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        let mut st = self.queue.state.lock().expect("bus queue poisoned");
        let env = st.items.pop_front();
        drop(st);
        if env.is_some() {
            self.queue.space.notify_all();
        }
        env
    }

    /// Blocks until an envelope arrives or the bus is closed and drained.
    pub fn recv(&self) -> Option<Envelope> {
        let mut st = self.queue.state.lock().expect("bus queue poisoned");
        loop {
            if let Some(env) = st.items.pop_front() {
                drop(st);
                self.queue.space.notify_all();
                return Some(env);
            }
            if st.closed {
                return None;
            }
            st = self.queue.ready.wait(st).expect("bus queue poisoned");
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Envelope> {
        let deadline = Instant::now() + timeout;
        let mut st = self.queue.state.lock().expect("bus queue poisoned");
        loop {
            if let Some(env) = st.items.pop_front() {
                drop(st);
                self.queue.space.notify_all();
                return Some(env);
            }
            let now = Instant::now();
            if st.closed || now >= deadline {
                return None;
            }
            st = self.queue.ready.wait_timeout(st, deadline - now).expect("bus queue poisoned").0;
        }
    }

    pub fn drain(&self) -> Vec<Envelope> {
        let mut st = self.queue.state.lock().expect("bus queue poisoned");
        let out: Vec<_> = st.items.drain(..).collect();
        drop(st);
        self.queue.space.notify_all();
        out
    }

    pub fn len(&self) -> usize {
        self.queue.state.lock().expect("bus queue poisoned").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Envelopes discarded by the drop-oldest policy.
    pub fn dropped(&self) -> u64 {
        self.queue.state.lock().expect("bus queue poisoned").dropped
    }

    /// Envelopes accepted past the soft capacity.
    pub fn overflowed(&self) -> u64 {
        self.queue.state.lock().expect("bus queue poisoned").overflowed
    }
}

/// Reads an NDJSON trace written by [`Bus::with_trace`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<Envelope>, BusError> {
    let text = std::fs::read_to_string(path)?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(BusError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn first_publish_gets_seq_one() {
        let bus = Bus::default();
        assert_eq!(bus.publish("anomalies", &json!({"a_fog": 0.3})).unwrap(), 1);
        assert_eq!(bus.publish("anomalies", &json!({"a_fog": 0.4})).unwrap(), 2);
        assert_eq!(bus.publish("actions", &json!({})).unwrap(), 1);
    }

    #[test]
    fn unknown_topic_is_rejected() {
        let bus = Bus::default();
        assert!(matches!(bus.publish("chunk/stream3", &1), Err(BusError::UnknownTopic(_))));
        assert!(bus.subscribe("scores/transformer").is_err());
    }

    #[test]
    fn no_subscriber_still_advances_seq() {
        let bus = Bus::default();
        bus.publish("monitor/logs", &1).unwrap();
        assert_eq!(bus.last_seq(Topic::MonitorLogs), 1);
        let sub = bus.subscribe("monitor/logs").unwrap();
        assert_eq!(bus.publish("monitor/logs", &2).unwrap(), 2);
        assert_eq!(sub.try_recv().unwrap().seq, 2);
    }

    #[test]
    fn three_messages_received_in_order() {
        let bus = Bus::default();
        let sub = bus.subscribe("chunk/stream1").unwrap();
        for i in 0..3 {
            bus.publish("chunk/stream1", &i).unwrap();
        }
        let got: Vec<i32> = sub.drain().iter().map(|e| e.decode().unwrap()).collect();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn fan_out_identical_payloads() {
        let bus = Bus::default();
        let a = bus.subscribe("anomalies").unwrap();
        let b = bus.subscribe("anomalies").unwrap();
        bus.publish("anomalies", &json!({"x": 1})).unwrap();
        assert_eq!(a.recv().unwrap(), b.recv().unwrap());
    }

    #[test]
    fn monitor_logs_drops_oldest() {
        let bus = Bus::new(2);
        let sub = bus.subscribe("monitor/logs").unwrap();
        for i in 0..5 {
            bus.publish("monitor/logs", &i).unwrap();
        }
        assert_eq!(sub.dropped(), 3);
        let got: Vec<i32> = sub.drain().iter().map(|e| e.decode().unwrap()).collect();
        assert_eq!(got, vec![3, 4]);
    }

    #[test]
    fn detection_topics_never_drop() {
        let bus = Bus::new(2);
        let sub = bus.subscribe("anomalies").unwrap();
        for i in 0..10 {
            bus.publish("anomalies", &i).unwrap();
        }
        assert_eq!(sub.len(), 10);
        assert_eq!(sub.overflowed(), 8);
    }

    #[test]
    fn blocking_publish_times_out_on_full_cloud_queue() {
        let bus = Bus::new(1);
        let _sub = bus.subscribe("policy/updates").unwrap();
        bus.publish_blocking(Topic::PolicyUpdates, &1, Duration::from_millis(10)).unwrap();
        let err = bus.publish_blocking(Topic::PolicyUpdates, &2, Duration::from_millis(10));
        assert!(matches!(err, Err(BusError::Timeout(_))));
    }

    #[test]
    fn logical_clock_stamps_envelopes() {
        let bus = Bus::default();
        let sub = bus.subscribe_topic(Topic::Actions);
        bus.set_tick(17);
        bus.publish_topic(Topic::Actions, &"x").unwrap();
        assert_eq!(sub.recv().unwrap().timestamp, 17);
    }

    #[test]
    fn trace_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.ndjson");
        let bus = Bus::with_trace(16, &path).unwrap();
        bus.publish("chunk/stream2", &json!([1.0, 2.0])).unwrap();
        bus.publish("policy/updates", &json!({"w1": 0.42})).unwrap();
        bus.flush_trace().unwrap();
        let envs = read_trace(&path).unwrap();
        assert_eq!(envs.len(), 2);
        assert_eq!(envs[1].topic, Topic::PolicyUpdates);
    }
}
