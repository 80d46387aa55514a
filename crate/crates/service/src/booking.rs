//! Booking saga: reserve (inventory holds), pay (mock processor), confirm
//! (commit and publish `booking.confirmed`). A failed step releases every hold
//! and leaves the booking Cancelled.
//!
//! Booking ids derive from the idempotency key, and each booking has its own
//! async lock, so a repeated key replays the stored outcome (status code and
//! body) without touching inventory again.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use axum::http::StatusCode;
use resa_client::{Client, ClientError};
use resa_core::model::{slot_cost, validate_itinerary};
use resa_core::wire::{BookingRecord, BookingRequest, BookingStatus, ErrorBody, HoldItem, HoldRequest};
use resa_core::{Catalog, Itinerary, OptionId, TripRequest};
use sha2::{Digest, Sha256};
use tokio::sync::Mutex as AsyncMutex;

use crate::bus::Bus;
use crate::error::ApiError;
use crate::inventory::{Clock, Inventory, InventoryError};

pub const CONFIRMED_TOPIC: &str = "booking.confirmed";

/// Where holds are placed: in this process or in the inventory service.
#[derive(Debug, Clone)]
pub enum InventoryPort {
    Local(Arc<Inventory>),
    Remote(Client),
}

fn remote_err(e: ClientError) -> InventoryError {
    match &e {
        ClientError::Api { status: 409, body } => InventoryError::SoldOut {
            option_id: OptionId(body.error.trim_start_matches("sold out: ").to_owned()),
        },
        ClientError::Api { status: 410, .. } => InventoryError::Expired,
        ClientError::Api { status: 404, body } => InventoryError::UnknownHold(body.error.clone()),
        _ => InventoryError::Invalid(format!("inventory service: {e}")),
    }
}

impl InventoryPort {
    async fn hold(&self, items: Vec<HoldItem>, ttl_ms: u64) -> Result<(String, u64), InventoryError> {
        match self {
            InventoryPort::Local(inv) => inv.hold(&items, ttl_ms),
            InventoryPort::Remote(c) => c
                .hold(&HoldRequest { items, ttl_ms })
                .await
                .map(|r| (r.hold_id, r.expires_at_ms))
                .map_err(remote_err),
        }
    }

    async fn commit(&self, hold_id: &str) -> Result<(), InventoryError> {
        match self {
            InventoryPort::Local(inv) => inv.commit(hold_id),
            InventoryPort::Remote(c) => c.commit(hold_id).await.map(|_| ()).map_err(remote_err),
        }
    }

    async fn release(&self, hold_id: &str) -> Result<(), InventoryError> {
        match self {
            InventoryPort::Local(inv) => inv.release(hold_id),
            InventoryPort::Remote(c) => c.release(hold_id).await.map(|_| ()).map_err(remote_err),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BookingConfig {
    pub hold_ttl_ms: u64,
    pub payment_decline_threshold: f64,
}

/// Stored outcome of the last step, replayed for duplicate requests.
#[derive(Debug, Clone)]
struct Entry {
    record: BookingRecord,
    hold_id: Option<String>,
    paid: bool,
    outcome: Option<(StatusCode, String)>,
}

type Cell = Arc<AsyncMutex<Option<Entry>>>;

pub struct BookingService {
    catalog: Arc<Catalog>,
    inventory: InventoryPort,
    bus: Arc<Bus>,
    config: BookingConfig,
    clock: Clock,
    cells: Mutex<HashMap<String, Cell>>,
}

pub fn booking_id_for(idempotency_key: &str) -> String {
    let d = Sha256::digest(idempotency_key.as_bytes());
    format!("bk-{}", hex16(&d))
}

fn payment_ref_for(idempotency_key: &str) -> String {
    let d = Sha256::digest(format!("payment:{idempotency_key}").as_bytes());
    format!("pay-{}", hex16(&d))
}

fn hex16(d: &[u8]) -> String {
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// The window an itinerary spans, used when the booking carries no request.
fn implied_request(it: &Itinerary, catalog: &Catalog) -> Option<TripRequest> {
    let legs: Vec<_> = it
        .slots
        .iter()
        .filter_map(|id| catalog.get(id))
        .filter(|o| o.kind.is_transport())
        .collect();
    let first = legs.first()?;
    Some(TripRequest {
        origin: first.origin.clone(),
        destination: first.destination.clone(),
        earliest_departure: legs.iter().map(|o| o.depart_time).min()?,
        latest_arrival: legs.iter().map(|o| o.arrive_time).max()?,
        nights: it.nights,
        budget: f64::MAX,
        preferred_modes: Default::default(),
        weights: Default::default(),
    })
}

/// Units per option: one seat per transport leg, `nights` room-nights per hotel.
pub fn hold_items(it: &Itinerary, catalog: &Catalog) -> Vec<HoldItem> {
    let mut units: BTreeMap<OptionId, u32> = BTreeMap::new();
    for id in &it.slots {
        let n = match catalog.get(id) {
            Some(o) if !o.kind.is_transport() => it.nights.max(1),
            _ => 1,
        };
        *units.entry(id.clone()).or_default() += n;
    }
    units
        .into_iter()
        .map(|(option_id, units)| HoldItem { option_id, units })
        .collect()
}

fn ok(record: &BookingRecord) -> (StatusCode, String) {
    (StatusCode::OK, serde_json::to_string(record).expect("serializable"))
}

fn fail(status: StatusCode, msg: &str, record: &BookingRecord) -> (StatusCode, String) {
    let body = ErrorBody {
        error: msg.to_owned(),
        violations: None,
        booking: Some(Box::new(record.clone())),
    };
    (status, serde_json::to_string(&body).expect("serializable"))
}

impl BookingService {
    pub fn new(catalog: Arc<Catalog>, inventory: InventoryPort, bus: Arc<Bus>, config: BookingConfig, clock: Clock) -> Self {
        BookingService {
            catalog,
            inventory,
            bus,
            config,
            clock,
            cells: Mutex::new(HashMap::new()),
        }
    }

    fn cell(&self, id: &str, create: bool) -> Option<Cell> {
        let mut cells = self.cells.lock().unwrap_or_else(|e| e.into_inner());
        if create {
            Some(cells.entry(id.to_owned()).or_default().clone())
        } else {
            cells.get(id).cloned()
        }
    }

    /// Runs the saga (or only the reserve step when `auto_confirm` is false).
    /// Returns the status code and JSON body to send.
    pub async fn create(&self, req: &BookingRequest, force_decline: bool) -> Result<(StatusCode, String), ApiError> {
        if req.idempotency_key.is_empty() || req.user_id.is_empty() {
            return Err(ApiError::bad_request("user_id and idempotency_key are required"));
        }
        let id = booking_id_for(&req.idempotency_key);
        let cell = self.cell(&id, true).expect("created");
        let mut slot = cell.lock().await;
        if let Some(e) = slot.as_mut() {
            self.expire_if_due(e).await;
            return Ok(e.outcome.clone().unwrap_or_else(|| ok(&e.record)));
        }

        let request = match &req.trip_request {
            Some(r) => r.clone(),
            None => implied_request(&req.itinerary, &self.catalog)
                .ok_or_else(|| ApiError::unprocessable("itinerary has no transport leg"))?,
        };
        if let Err(v) = validate_itinerary(&req.itinerary, &self.catalog, &request) {
            let mut e = ApiError::unprocessable("invalid itinerary");
            e.body.violations = Some(v);
            return Err(e);
        }
        let total_price = req
            .itinerary
            .slots
            .iter()
            .filter_map(|i| self.catalog.get(i))
            .map(|o| slot_cost(o, req.itinerary.nights))
            .sum();
        let mut entry = Entry {
            record: BookingRecord {
                booking_id: id,
                user_id: req.user_id.clone(),
                itinerary: req.itinerary.clone(),
                status: BookingStatus::Reserved,
                idempotency_key: req.idempotency_key.clone(),
                total_price,
                hold_expires_at_ms: 0,
                payment_reference: None,
            },
            hold_id: None,
            paid: false,
            outcome: None,
        };

        match self
            .inventory
            .hold(hold_items(&req.itinerary, &self.catalog), self.config.hold_ttl_ms)
            .await
        {
            Ok((hold, exp)) => {
                entry.hold_id = Some(hold);
                entry.record.hold_expires_at_ms = exp;
            }
            Err(InventoryError::SoldOut { .. }) => {
                entry.record.status = BookingStatus::Cancelled;
                entry.outcome = Some(fail(StatusCode::CONFLICT, "sold out", &entry.record));
            }
            Err(e) => return Err(ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())),
        }
        if entry.outcome.is_none() && req.auto_confirm {
            self.pay_step(&mut entry, force_decline).await;
            if entry.outcome.is_none() {
                self.confirm_step(&mut entry).await;
            }
        }
        let out = entry.outcome.clone().unwrap_or_else(|| ok(&entry.record));
        *slot = Some(entry);
        Ok(out)
    }

    async fn release(&self, e: &mut Entry) {
        if let Some(h) = &e.hold_id {
            if let Err(err) = self.inventory.release(h).await {
                tracing::warn!(hold = %h, error = %err, "release failed");
            }
        }
    }

    async fn expire_if_due(&self, e: &mut Entry) {
        if e.record.status == BookingStatus::Reserved && self.clock.now_ms() >= e.record.hold_expires_at_ms {
            self.release(e).await;
            e.record.status = BookingStatus::Expired;
            e.outcome = None;
        }
    }

    async fn pay_step(&self, e: &mut Entry, force_decline: bool) {
        if e.paid {
            return;
        }
        if force_decline || e.record.total_price > self.config.payment_decline_threshold {
            self.release(e).await;
            e.record.status = BookingStatus::Cancelled;
            e.outcome = Some(fail(StatusCode::PAYMENT_REQUIRED, "payment declined", &e.record));
            return;
        }
        e.paid = true;
        e.record.payment_reference = Some(payment_ref_for(&e.record.idempotency_key));
    }

    async fn confirm_step(&self, e: &mut Entry) {
        let hold = e.hold_id.clone().expect("reserved bookings hold inventory");
        match self.inventory.commit(&hold).await {
            Ok(()) => {
                e.record.status = BookingStatus::Confirmed;
                let payload = serde_json::json!({
                    "booking_id": e.record.booking_id,
                    "user_id": e.record.user_id,
                    "slots": e.record.itinerary.slots,
                    "total_price": e.record.total_price,
                });
                if let Err(err) = self.bus.publish(CONFIRMED_TOPIC, payload).await {
                    tracing::warn!(booking = %e.record.booking_id, error = %err, "event not published");
                }
            }
            Err(InventoryError::Expired) | Err(InventoryError::Released) => {
                e.record.status = BookingStatus::Expired;
                e.outcome = Some(fail(StatusCode::GONE, "hold expired", &e.record));
            }
            Err(other) => {
                self.release(e).await;
                e.record.status = BookingStatus::Cancelled;
                e.outcome = Some(fail(StatusCode::BAD_GATEWAY, &other.to_string(), &e.record));
            }
        }
    }

    async fn with_booking<F>(&self, id: &str, f: F) -> Result<(StatusCode, String), ApiError>
    where
        F: for<'a> FnOnce(&'a Self, &'a mut Entry) -> std::pin::Pin<Box<dyn std::future::Future<Output = Result<(StatusCode, String), ApiError>> + Send + 'a>>,
    {
        let cell = self
            .cell(id, false)
            .ok_or_else(|| ApiError::not_found(format!("unknown booking {id}")))?;
        let mut slot = cell.lock().await;
        let e = slot
            .as_mut()
            .ok_or_else(|| ApiError::not_found(format!("unknown booking {id}")))?;
        self.expire_if_due(e).await;
        f(self, e).await
    }

    pub async fn get(&self, id: &str) -> Result<(StatusCode, String), ApiError> {
        self.with_booking(id, |_, e| Box::pin(async move { Ok(ok(&e.record)) })).await
    }

    pub async fn pay(&self, id: &str, force_decline: bool) -> Result<(StatusCode, String), ApiError> {
        self.with_booking(id, move |s, e| {
            Box::pin(async move {
                match e.record.status {
                    BookingStatus::Reserved => {
                        s.pay_step(e, force_decline).await;
                        Ok(e.outcome.clone().unwrap_or_else(|| ok(&e.record)))
                    }
                    // paying a confirmed booking again changes nothing
                    BookingStatus::Confirmed => Ok(ok(&e.record)),
                    _ => Ok(transition_error(e)),
                }
            })
        })
        .await
    }

    pub async fn confirm(&self, id: &str) -> Result<(StatusCode, String), ApiError> {
        self.with_booking(id, |s, e| {
            Box::pin(async move {
                match e.record.status {
                    BookingStatus::Reserved if !e.paid => {
                        Ok(fail(StatusCode::CONFLICT, "payment required", &e.record))
                    }
                    BookingStatus::Reserved => {
                        s.confirm_step(e).await;
                        Ok(e.outcome.clone().unwrap_or_else(|| ok(&e.record)))
                    }
                    BookingStatus::Confirmed => Ok(ok(&e.record)),
                    _ => Ok(transition_error(e)),
                }
            })
        })
        .await
    }

    pub async fn cancel(&self, id: &str) -> Result<(StatusCode, String), ApiError> {
        self.with_booking(id, |s, e| {
            Box::pin(async move {
                match e.record.status {
                    BookingStatus::Reserved => {
                        s.release(e).await;
                        e.record.status = BookingStatus::Cancelled;
                        e.outcome = None;
                        Ok(ok(&e.record))
                    }
                    BookingStatus::Cancelled => Ok(ok(&e.record)),
                    _ => Ok(transition_error(e)),
                }
            })
        })
        .await
    }

    /// Bookings held by this service, by status; used by tests and metrics.
    pub async fn status_counts(&self) -> BTreeMap<String, usize> {
        let cells: Vec<Cell> = self
            .cells
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let mut out = BTreeMap::new();
        for c in cells {
            if let Some(e) = c.lock().await.as_ref() {
                *out.entry(format!("{:?}", e.record.status)).or_insert(0) += 1;
            }
        }
        out
    }
}

fn transition_error(e: &Entry) -> (StatusCode, String) {
    let status = if e.record.status == BookingStatus::Expired {
        StatusCode::GONE
    } else {
        StatusCode::CONFLICT
    };
    fail(status, &format!("booking is {:?}", e.record.status), &e.record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use resa_core::model::OptionKind;
    use resa_core::TravelOption;
    use std::sync::atomic::{AtomicU64, Ordering};
    use std::time::Duration;

    const NIGHT: i64 = resa_core::model::MINUTES_PER_DAY;

    fn t(id: &str, o: &str, d: &str, dep: i64, price: f64, cap: u32) -> TravelOption {
        TravelOption {
            id: id.into(),
            kind: OptionKind::Train,
            origin: o.into(),
            destination: d.into(),
            depart_time: dep,
            arrive_time: dep + 60,
            price,
            distance_km: 100.0,
            capacity: cap,
            eco_rating: 0.0,
        }
    }

    struct Fx {
        svc: BookingService,
        inv: Arc<Inventory>,
        bus: Arc<Bus>,
        time: Arc<AtomicU64>,
    }

    fn fx(cap: u32) -> Fx {
        let hotel = TravelOption {
            id: "h".into(),
            kind: OptionKind::Hotel,
            origin: String::new(),
            destination: "B".into(),
            depart_time: 0,
            arrive_time: 10 * NIGHT,
            price: 50.0,
            distance_km: 0.0,
            capacity: 4,
            eco_rating: 0.5,
        };
        let catalog = Arc::new(
            Catalog::new(
                ["A".to_string(), "B".to_string()],
                vec![t("out", "A", "B", 100, 80.0, cap), t("ret", "B", "A", 3 * NIGHT, 70.0, cap), t("pricey", "A", "B", 100, 50_000.0, 5), hotel],
            )
            .unwrap(),
        );
        let time = Arc::new(AtomicU64::new(10_000));
        let clock = Clock::Manual(time.clone());
        let inv = Arc::new(Inventory::from_catalog(&catalog, clock.clone()));
        let bus = Arc::new(Bus::new(64, Duration::from_millis(100), true));
        let svc = BookingService::new(
            catalog,
            InventoryPort::Local(inv.clone()),
            bus.clone(),
            BookingConfig { hold_ttl_ms: 30_000, payment_decline_threshold: 10_000.0 },
            clock,
        );
        Fx { svc, inv, bus, time }
    }

    fn req(key: &str, slots: &[&str], nights: u32, auto: bool) -> BookingRequest {
        BookingRequest {
            user_id: "u1".into(),
            itinerary: Itinerary { slots: slots.iter().map(|s| OptionId((*s).into())).collect(), nights },
            idempotency_key: key.into(),
            trip_request: None,
            auto_confirm: auto,
        }
    }

    fn record(body: &str) -> BookingRecord {
        serde_json::from_str(body).unwrap()
    }

    fn avail(f: &Fx, id: &str) -> u32 {
        f.inv.availability(&id.into()).unwrap().available
    }

    #[tokio::test]
    async fn capacity_one_second_booking_sold_out() {
        let f = fx(1);
        let (s1, b1) = f.svc.create(&req("k1", &["out"], 0, true), false).await.unwrap();
        assert_eq!(s1, StatusCode::OK);
        assert_eq!(record(&b1).status, BookingStatus::Confirmed);
        let (s2, b2) = f.svc.create(&req("k2", &["out"], 0, true), false).await.unwrap();
        assert_eq!(s2, StatusCode::CONFLICT);
        let e: ErrorBody = serde_json::from_str(&b2).unwrap();
        assert_eq!(e.error, "sold out");
        assert_eq!(e.booking.unwrap().status, BookingStatus::Cancelled);
        assert_eq!(avail(&f, "out"), 0);
    }

    #[tokio::test]
    async fn same_key_twice_books_once() {
        let f = fx(5);
        let r = req("same", &["out", "h", "ret"], 2, true);
        let a = f.svc.create(&r, false).await.unwrap();
        let b = f.svc.create(&r, false).await.unwrap();
        assert_eq!(a, b);
        assert_eq!(avail(&f, "out"), 4);
        assert_eq!(avail(&f, "h"), 2);
        let rec = record(&a.1);
        assert_eq!(rec.booking_id, booking_id_for("same"));
        assert_eq!(rec.total_price, 80.0 + 2.0 * 50.0 + 70.0);
        assert_eq!(f.bus.last_seq(CONFIRMED_TOPIC).await, 1);
    }

    #[tokio::test]
    async fn payment_decline_releases_holds() {
        let f = fx(5);
        let (s, body) = f.svc.create(&req("d1", &["out"], 0, true), true).await.unwrap();
        assert_eq!(s, StatusCode::PAYMENT_REQUIRED);
        assert_eq!(serde_json::from_str::<ErrorBody>(&body).unwrap().booking.unwrap().status, BookingStatus::Cancelled);
        assert_eq!(avail(&f, "out"), 5);
        let (s, _) = f.svc.create(&req("d2", &["pricey"], 0, true), false).await.unwrap();
        assert_eq!(s, StatusCode::PAYMENT_REQUIRED);
        assert_eq!(avail(&f, "pricey"), 5);
        assert_eq!(f.bus.last_seq(CONFIRMED_TOPIC).await, 0);
    }

    #[tokio::test]
    async fn stepwise_saga_and_expiry() {
        let f = fx(5);
        let (_, b) = f.svc.create(&req("s1", &["out"], 0, false), false).await.unwrap();
        let rec = record(&b);
        assert_eq!(rec.status, BookingStatus::Reserved);
        assert_eq!(avail(&f, "out"), 4);
        let (s, _) = f.svc.confirm(&rec.booking_id).await.unwrap();
        assert_eq!(s, StatusCode::CONFLICT);
        let (_, paid) = f.svc.pay(&rec.booking_id, false).await.unwrap();
        assert!(record(&paid).payment_reference.is_some());
        let (_, done) = f.svc.confirm(&rec.booking_id).await.unwrap();
        assert_eq!(record(&done).status, BookingStatus::Confirmed);
        let again = f.svc.confirm(&rec.booking_id).await.unwrap();
        assert_eq!(again.1, done);
        assert_eq!(f.svc.cancel(&rec.booking_id).await.unwrap().0, StatusCode::CONFLICT);

        let (_, b) = f.svc.create(&req("s2", &["out"], 0, false), false).await.unwrap();
        let id = record(&b).booking_id;
        f.time.fetch_add(30_000, Ordering::SeqCst);
        let (s, body) = f.svc.get(&id).await.unwrap();
        assert_eq!(s, StatusCode::OK);
        assert_eq!(record(&body).status, BookingStatus::Expired);
        assert_eq!(f.svc.pay(&id, false).await.unwrap().0, StatusCode::GONE);
        assert_eq!(avail(&f, "out"), 4);

        let (_, b) = f.svc.create(&req("s3", &["out"], 0, false), false).await.unwrap();
        let id = record(&b).booking_id;
        assert_eq!(record(&f.svc.cancel(&id).await.unwrap().1).status, BookingStatus::Cancelled);
        assert_eq!(avail(&f, "out"), 4);
        assert_eq!(f.svc.get("bk-nope").await.unwrap_err().status, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn invalid_itinerary_rejected_without_holds() {
        let f = fx(5);
        let e = f.svc.create(&req("bad", &["ret", "out"], 0, true), false).await.unwrap_err();
        assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY);
        assert!(e.body.violations.is_some());
        assert_eq!(avail(&f, "out"), 5);
        let e = f.svc.create(&req("ghost", &["nope"], 0, true), false).await.unwrap_err();
        assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY);
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 4)]
    async fn concurrent_bookings_never_overbook() {
        let f = Arc::new(fx(50));
        let tasks: Vec<_> = (0..500)
            .map(|i| {
                let f = f.clone();
                tokio::spawn(async move { f.svc.create(&req(&format!("c{i}"), &["out"], 0, true), false).await.unwrap().0 })
            })
            .collect();
        let mut ok = 0;
        let mut conflict = 0;
        for t in tasks {
            match t.await.unwrap() {
                StatusCode::OK => ok += 1,
                StatusCode::CONFLICT => conflict += 1,
                s => panic!("{s}"),
            }
        }
        assert_eq!((ok, conflict), (50, 450));
        assert_eq!(avail(&f, "out"), 0);
        assert_eq!(f.svc.status_counts().await.get("Confirmed"), Some(&50));
    }
}
