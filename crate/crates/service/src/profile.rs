//! Profile read model fed by `booking.confirmed` events.
//!
//! Events are applied strictly in sequence order: an event whose number is not
//! `last + 1` is ignored, so replays and duplicates are harmless and a gap is
//! filled by the next poll.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use resa_client::Client;
use resa_core::wire::Event;

use crate::booking::CONFIRMED_TOPIC;
use crate::bus::Subscription;

#[derive(Debug, Default)]
struct State {
    last_seq: u64,
    confirmed: HashMap<String, Vec<String>>,
}

#[derive(Debug, Default)]
pub struct ProfileStore {
    state: Mutex<State>,
}

impl ProfileStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// True when the event was the next one in sequence and has been applied.
    pub fn apply(&self, event: &Event) -> bool {
        let mut st = self.lock();
        if event.seq != st.last_seq + 1 {
            return false;
        }
        st.last_seq = event.seq;
        let user = event.payload["user_id"].as_str();
        let booking = event.payload["booking_id"].as_str();
        if let (Some(u), Some(b)) = (user, booking) {
            st.confirmed.entry(u.to_owned()).or_default().push(b.to_owned());
        } else {
            tracing::warn!(seq = event.seq, "event without user_id/booking_id skipped");
        }
        true
    }

    pub fn last_seq(&self) -> u64 {
        self.lock().last_seq
    }

    pub fn confirmed(&self, user_id: &str) -> Vec<String> {
        self.lock().confirmed.get(user_id).cloned().unwrap_or_default()
    }
}

/// Applies events from an in-process subscription until the bus goes away.
pub fn spawn_local_consumer(mut sub: Subscription, store: Arc<ProfileStore>) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        while let Some(e) = sub.recv().await {
            store.apply(&e);
        }
    })
}

/// Pages through the booking service's event log every `poll`.
pub fn spawn_remote_consumer(client: Client, store: Arc<ProfileStore>, poll: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        loop {
            match client.events(CONFIRMED_TOPIC, store.last_seq(), 500).await {
                Ok(r) if !r.events.is_empty() => {
                    for e in &r.events {
                        store.apply(e);
                    }
                    continue;
                }
                Ok(_) => {}
                Err(e) => tracing::debug!(error = %e, "event poll failed"),
            }
            tokio::time::sleep(poll).await;
        }
    })
}
