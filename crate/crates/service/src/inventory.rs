//! Inventory with holds, commits and releases.
//!
//! Every option has its own lock. A multi-option hold locks its options in id
//! order, checks all of them and only then writes, so it is all-or-nothing and
//! deadlock-free. Lock order is always option locks first, then the hold index.
//! `available = capacity - committed - unexpired holds` and never underflows.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use resa_core::wire::{Availability, HoldItem};
use resa_core::{Catalog, OptionId};

/// Millisecond clock; the manual variant lets tests move time.
#[derive(Debug, Clone)]
pub enum Clock {
    System,
    Manual(Arc<AtomicU64>),
}

impl Clock {
    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            Clock::Manual(t) => t.load(Ordering::SeqCst),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InventoryError {
    #[error("sold out")]
    SoldOut { option_id: OptionId },
    #[error("unknown option {0}")]
    UnknownOption(OptionId),
    #[error("unknown hold {0}")]
    UnknownHold(String),
    #[error("hold expired")]
    Expired,
    #[error("hold already released")]
    Released,
    #[error("invalid hold: {0}")]
    Invalid(String),
}

#[derive(Debug)]
struct Slot {
    capacity: u32,
    committed: u32,
    /// hold id -> (units, expires_at_ms)
    holds: HashMap<String, (u32, u64)>,
}

impl Slot {
    fn purge(&mut self, now: u64) {
        self.holds.retain(|_, (_, exp)| *exp > now);
    }

    fn held(&self) -> u32 {
        self.holds.values().map(|(u, _)| u).sum()
    }

    fn available(&self) -> u32 {
        self.capacity - self.committed - self.held()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HoldState {
    Active,
    Committed,
    Released,
}

#[derive(Debug)]
struct HoldEntry {
    items: Vec<(OptionId, u32)>,
    state: HoldState,
}

#[derive(Debug)]
pub struct Inventory {
    slots: BTreeMap<OptionId, Mutex<Slot>>,
    holds: Mutex<HashMap<String, HoldEntry>>,
    next_hold: AtomicU64,
    clock: Clock,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Inventory {
    pub fn from_catalog(catalog: &Catalog, clock: Clock) -> Self {
        let slots = catalog
            .options()
            .iter()
            .map(|o| {
                (
                    o.id.clone(),
                    Mutex::new(Slot {
                        capacity: o.capacity,
                        committed: 0,
                        holds: HashMap::new(),
                    }),
                )
            })
            .collect();
        Inventory {
            slots,
            holds: Mutex::new(HashMap::new()),
            next_hold: AtomicU64::new(1),
            clock,
        }
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    /// Locks the options of `items` in id order.
    fn lock_slots<'b>(
        &self,
        ids: impl Iterator<Item = &'b OptionId>,
    ) -> Result<Vec<MutexGuard<'_, Slot>>, InventoryError> {
        let mut sorted: Vec<&OptionId> = ids.collect();
        sorted.sort();
        sorted.dedup();
        sorted
            .into_iter()
            .map(|id| {
                self.slots
                    .get(id)
                    .map(lock)
                    .ok_or_else(|| InventoryError::UnknownOption(id.clone()))
            })
            .collect()
    }

    /// Holds `units` of every item, or nothing. Returns (hold id, expiry).
    pub fn hold(&self, items: &[HoldItem], ttl_ms: u64) -> Result<(String, u64), InventoryError> {
        if items.is_empty() {
            return Err(InventoryError::Invalid("no items".into()));
        }
        let mut merged: BTreeMap<OptionId, u32> = BTreeMap::new();
        for it in items {
            if it.units == 0 {
                return Err(InventoryError::Invalid(format!("zero units for {}", it.option_id.0)));
            }
            *merged.entry(it.option_id.clone()).or_default() += it.units;
        }
        let mut guards = self.lock_slots(merged.keys())?;
        let now = self.clock.now_ms();
        for ((id, &units), g) in merged.iter().zip(guards.iter_mut()) {
            g.purge(now);
            if g.available() < units {
                return Err(InventoryError::SoldOut { option_id: id.clone() });
            }
        }
        let hold_id = format!("h{:08}", self.next_hold.fetch_add(1, Ordering::SeqCst));
        let expires = now.saturating_add(ttl_ms);
        for ((_, &units), g) in merged.iter().zip(guards.iter_mut()) {
            g.holds.insert(hold_id.clone(), (units, expires));
        }
        lock(&self.holds).insert(
            hold_id.clone(),
            HoldEntry {
                items: merged.into_iter().collect(),
                state: HoldState::Active,
            },
        );
        drop(guards);
        Ok((hold_id, expires))
    }

    fn items_of(&self, hold_id: &str) -> Result<(Vec<(OptionId, u32)>, HoldState), InventoryError> {
        let holds = lock(&self.holds);
        let e = holds
            .get(hold_id)
            .ok_or_else(|| InventoryError::UnknownHold(hold_id.to_owned()))?;
        Ok((e.items.clone(), e.state))
    }

    fn set_state(&self, hold_id: &str, state: HoldState) {
        if let Some(e) = lock(&self.holds).get_mut(hold_id) {
            e.state = state;
        }
    }

    /// Converts a live hold into committed units. Committing twice is a no-op.
    pub fn commit(&self, hold_id: &str) -> Result<(), InventoryError> {
        let (items, state) = self.items_of(hold_id)?;
        match state {
            HoldState::Committed => return Ok(()),
            HoldState::Released => return Err(InventoryError::Released),
            HoldState::Active => {}
        }
        let mut guards = self.lock_slots(items.iter().map(|(id, _)| id))?;
        // re-read under the option locks: a concurrent commit or release may have won
        match self.items_of(hold_id)?.1 {
            HoldState::Committed => return Ok(()),
            HoldState::Released => return Err(InventoryError::Released),
            HoldState::Active => {}
        }
        let now = self.clock.now_ms();
        let live = guards
            .iter()
            .all(|g| g.holds.get(hold_id).is_some_and(|(_, exp)| *exp > now));
        if !live {
            for g in guards.iter_mut() {
                g.holds.remove(hold_id);
            }
            self.set_state(hold_id, HoldState::Released);
            return Err(InventoryError::Expired);
        }
        for g in guards.iter_mut() {
            let (units, _) = g.holds.remove(hold_id).expect("checked above");
            g.committed += units;
        }
        self.set_state(hold_id, HoldState::Committed);
        Ok(())
    }

    /// Drops a hold. Releasing twice, or after expiry, is a no-op.
    pub fn release(&self, hold_id: &str) -> Result<(), InventoryError> {
        let (items, state) = self.items_of(hold_id)?;
        match state {
            HoldState::Committed => return Err(InventoryError::Invalid("hold already committed".into())),
            HoldState::Released => return Ok(()),
            HoldState::Active => {}
        }
        let mut guards = self.lock_slots(items.iter().map(|(id, _)| id))?;
        if self.items_of(hold_id)?.1 == HoldState::Committed {
            return Err(InventoryError::Invalid("hold already committed".into()));
        }
        for g in guards.iter_mut() {
            g.holds.remove(hold_id);
        }
        self.set_state(hold_id, HoldState::Released);
        Ok(())
    }

    pub fn availability(&self, option_id: &OptionId) -> Result<Availability, InventoryError> {
        let mut g = self
            .slots
            .get(option_id)
            .map(lock)
            .ok_or_else(|| InventoryError::UnknownOption(option_id.clone()))?;
        g.purge(self.clock.now_ms());
        Ok(Availability {
            option_id: option_id.clone(),
            capacity: g.capacity,
            committed: g.committed,
            held: g.held(),
            available: g.available(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use resa_core::model::OptionKind;
    use resa_core::TravelOption;
    use std::thread;

    fn opt(id: &str, cap: u32) -> TravelOption {
        TravelOption {
            id: id.into(),
            kind: OptionKind::Train,
            origin: "A".into(),
            destination: "B".into(),
            depart_time: 0,
            arrive_time: 10,
            price: 1.0,
            distance_km: 1.0,
            capacity: cap,
            eco_rating: 0.0,
        }
    }

    fn inv(caps: &[(&str, u32)]) -> (Inventory, Arc<AtomicU64>) {
        let t = Arc::new(AtomicU64::new(1_000));
        let c = Catalog::new(["A".to_string(), "B".to_string()], caps.iter().map(|(i, c)| opt(i, *c)).collect()).unwrap();
        (Inventory::from_catalog(&c, Clock::Manual(t.clone())), t)
    }

    fn item(id: &str, units: u32) -> HoldItem {
        HoldItem { option_id: id.into(), units }
    }

    fn avail(i: &Inventory, id: &str) -> u32 {
        i.availability(&id.into()).unwrap().available
    }

    #[test]
    fn hold_release_restores_exactly() {
        let (i, _) = inv(&[("a", 5)]);
        let (h, _) = i.hold(&[item("a", 3)], 100).unwrap();
        assert_eq!(avail(&i, "a"), 2);
        i.release(&h).unwrap();
        assert_eq!(avail(&i, "a"), 5);
        i.release(&h).unwrap();
        assert_eq!(i.commit(&h), Err(InventoryError::Released));
    }

    #[test]
    fn hold_full_capacity_then_one_more_is_rejected() {
        let (i, _) = inv(&[("a", 4)]);
        i.hold(&[item("a", 4)], 100).unwrap();
        assert!(matches!(i.hold(&[item("a", 1)], 100), Err(InventoryError::SoldOut { .. })));
    }

    #[test]
    fn multi_item_hold_is_all_or_nothing() {
        let (i, _) = inv(&[("a", 5), ("b", 1)]);
        let r = i.hold(&[item("a", 2), item("b", 2)], 100);
        assert_eq!(r, Err(InventoryError::SoldOut { option_id: "b".into() }));
        assert_eq!(avail(&i, "a"), 5);
        assert_eq!(avail(&i, "b"), 1);
        assert!(matches!(i.hold(&[item("a", 1), item("zz", 1)], 100), Err(InventoryError::UnknownOption(_))));
        assert!(i.hold(&[], 100).is_err());
        assert!(i.hold(&[item("a", 0)], 100).is_err());
    }

    #[test]
    fn commit_is_idempotent_and_expiry_releases() {
        let (i, t) = inv(&[("a", 3)]);
        let (h, exp) = i.hold(&[item("a", 2)], 100).unwrap();
        assert_eq!(exp, 1_100);
        i.commit(&h).unwrap();
        i.commit(&h).unwrap();
        let a = i.availability(&"a".into()).unwrap();
        assert_eq!((a.committed, a.held, a.available), (2, 0, 1));

        let (h2, _) = i.hold(&[item("a", 1)], 100).unwrap();
        assert_eq!(avail(&i, "a"), 0);
        t.store(1_100, Ordering::SeqCst);
        assert_eq!(avail(&i, "a"), 1);
        assert_eq!(i.commit(&h2), Err(InventoryError::Expired));
        assert_eq!(avail(&i, "a"), 1);
        assert!(matches!(i.commit("nope"), Err(InventoryError::UnknownHold(_))));
    }

    #[test]
    fn concurrent_storm_conserves_units() {
        let (i, _) = inv(&[("a", 50), ("b", 30), ("c", 20)]);
        let i = Arc::new(i);
        let handles: Vec<_> = (0..8)
            .map(|w| {
                let i = i.clone();
                thread::spawn(move || {
                    let mut committed = [0u32; 3];
                    for n in 0..200u32 {
                        let pick = ["a", "b", "c"];
                        let x = (w + n as usize) % 3;
                        let y = (w * 7 + n as usize) % 3;
                        let items = [item(pick[x], 1 + n % 2), item(pick[y], 1)];
                        if let Ok((h, _)) = i.hold(&items, 1_000_000) {
                            if n % 3 == 0 {
                                i.release(&h).unwrap();
                            } else {
                                i.commit(&h).unwrap();
                                for it in &items {
                                    committed[pick.iter().position(|p| *p == it.option_id.0).unwrap()] += it.units;
                                }
                            }
                        }
                    }
                    committed
                })
            })
            .collect();
        let mut total = [0u32; 3];
        for h in handles {
            let c = h.join().unwrap();
            for k in 0..3 {
                total[k] += c[k];
            }
        }
        for (k, (id, cap)) in [("a", 50), ("b", 30), ("c", 20)].iter().enumerate() {
            let a = i.availability(&(*id).into()).unwrap();
            assert_eq!(a.held, 0);
            assert_eq!(a.committed, total[k]);
            assert!(a.committed <= *cap);
            assert_eq!(a.available + a.committed, *cap);
        }
    }
}
