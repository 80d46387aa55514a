//! In-process publish/subscribe with per-topic sequence numbers.
//!
//! Publishing to a topic is serialized by that topic's lock, which assigns the
//! next sequence number and hands the event to every subscriber queue. Before
//! taking a number the publisher reserves a slot in each queue, waiting at
//! most `send_timeout`; on timeout nothing is sent and no number is used, so a
//! subscriber never sees a gap. Optionally every event is also kept in a log
//! that remote consumers page through with `events_after`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use resa_core::wire::Event;
use tokio::sync::mpsc;

use crate::inventory::Clock;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("publish timed out: subscriber queue full")]
    QueueFull,
}

#[derive(Debug, Default)]
struct TopicState {
    seq: u64,
    subscribers: Vec<mpsc::Sender<Event>>,
    log: Vec<Event>,
}

#[derive(Debug)]
pub struct Bus {
    topics: Mutex<HashMap<String, Arc<tokio::sync::Mutex<TopicState>>>>,
    depth: usize,
    send_timeout: Duration,
    retain: bool,
    clock: Clock,
}

pub struct Subscription {
    rx: mpsc::Receiver<Event>,
}

impl Subscription {
    pub async fn recv(&mut self) -> Option<Event> {
        self.rx.recv().await
    }

    pub fn try_recv(&mut self) -> Option<Event> {
        self.rx.try_recv().ok()
    }
}

impl Bus {
    pub fn new(depth: usize, send_timeout: Duration, retain: bool) -> Self {
        Bus {
            topics: Mutex::new(HashMap::new()),
            depth: depth.max(1),
            send_timeout,
            retain,
            clock: Clock::System,
        }
    }

    fn topic(&self, name: &str) -> Arc<tokio::sync::Mutex<TopicState>> {
        let mut t = self.topics.lock().unwrap_or_else(|e| e.into_inner());
        t.entry(name.to_owned()).or_default().clone()
    }

    pub async fn subscribe(&self, topic: &str) -> Subscription {
        let (tx, rx) = mpsc::channel(self.depth);
        self.topic(topic).lock().await.subscribers.push(tx);
        Subscription { rx }
    }

    /// Returns the sequence number given to the event.
    pub async fn publish(&self, topic: &str, payload: serde_json::Value) -> Result<u64, BusError> {
        let t = self.topic(topic);
        let mut st = t.lock().await;
        st.subscribers.retain(|s| !s.is_closed());
        let mut permits = Vec::with_capacity(st.subscribers.len());
        for s in &st.subscribers {
            match tokio::time::timeout(self.send_timeout, s.clone().reserve_owned()).await {
                Ok(Ok(p)) => permits.push(p),
                // receiver dropped since the retain above; skip it
                Ok(Err(_)) => {}
                Err(_) => return Err(BusError::QueueFull),
            }
        }
        st.seq += 1;
        let event = Event {
            topic: topic.to_owned(),
            seq: st.seq,
            payload,
            timestamp_ms: self.clock.now_ms(),
        };
        for p in permits {
            p.send(event.clone());
        }
        let seq = event.seq;
        if self.retain {
            st.log.push(event);
        }
        Ok(seq)
    }

    /// Logged events with `seq > after`, oldest first, at most `limit`.
    pub async fn events_after(&self, topic: &str, after: u64, limit: usize) -> Vec<Event> {
        let t = self.topic(topic);
        let st = t.lock().await;
        // seq n sits at index n - 1
        let start = (after as usize).min(st.log.len());
        st.log[start..].iter().take(limit).cloned().collect()
    }

    pub async fn last_seq(&self, topic: &str) -> u64 {
        self.topic(topic).lock().await.seq
    }
}
