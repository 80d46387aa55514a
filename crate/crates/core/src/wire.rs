//! JSON bodies of the HTTP API, shared by the services, the client and the
//! load generator. Field names are the wire names.

use serde::{Deserialize, Serialize};

use crate::model::{Itinerary, ItineraryTotals, OptionId, OptionKind, TravelOption, TripRequest, Violation};
use crate::recommend::Recommendation;
use crate::sustainability::Alternative;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violations: Option<Vec<Violation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub booking: Option<Box<BookingRecord>>,
}

impl ErrorBody {
    pub fn new(error: impl Into<String>) -> Self {
        ErrorBody {
            error: error.into(),
            violations: None,
            booking: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub options: Vec<TravelOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteRequest {
    pub option_id: OptionId,
    /// Day (since the scenario epoch) on which the quote is asked for.
    pub date: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteResponse {
    pub option_id: OptionId,
    pub kind: OptionKind,
    pub list_price: f64,
    pub predicted_price: f64,
    pub price_range: usize,
    pub price_range_label: String,
    pub days_before: i64,
    pub day_of_year: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendRequest {
    pub user_id: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub user_id: String,
    pub cold_start: bool,
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRequest {
    pub trip_request: TripRequest,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub generations: usize,
    pub evaluations: usize,
    pub stopped_early: bool,
    pub best_fitness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResponse {
    pub itinerary: Itinerary,
    pub fitness: f64,
    pub totals: ItineraryTotals,
    pub eco_score: f64,
    pub alternatives: Vec<Alternative>,
    pub trace: TraceSummary,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookingRequest {
    pub user_id: String,
    pub itinerary: Itinerary,
    pub idempotency_key: String,
    /// When present the itinerary is validated against it; otherwise against
    /// the window the itinerary itself spans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trip_request: Option<TripRequest>,
    /// Run reserve, pay and confirm in one call (default). When false the
    /// booking stays Reserved until `/pay` and `/confirm`.
    #[serde(default = "yes")]
    pub auto_confirm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BookingStatus {
    Reserved,
    Confirmed,
    Cancelled,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookingRecord {
    pub booking_id: String,
    pub user_id: String,
    pub itinerary: Itinerary,
    pub status: BookingStatus,
    pub idempotency_key: String,
    pub total_price: f64,
    /// Wall-clock milliseconds since the Unix epoch; a timing field.
    pub hold_expires_at_ms: u64,
    pub payment_reference: Option<String>,
}

/// Response fields that depend on wall-clock time and are excluded from
/// cross-deployment comparisons.
pub const TIMING_FIELDS: [&str; 2] = ["hold_expires_at_ms", "expires_at_ms"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldItem {
    pub option_id: OptionId,
    pub units: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldRequest {
    pub items: Vec<HoldItem>,
    pub ttl_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldResponse {
    pub hold_id: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldRef {
    pub hold_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Availability {
    pub option_id: OptionId,
    pub capacity: u32,
    pub committed: u32,
    pub held: u32,
    pub available: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub topic: String,
    pub seq: u64,
    pub payload: serde_json::Value,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsResponse {
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileResponse {
    pub profile: crate::model::UserProfile,
    /// Booking ids confirmed during this run, in event order.
    pub confirmed_bookings: Vec<String>,
    pub last_event_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub role: String,
    pub pid: u32,
}

/// Removes timing fields at any depth so bodies can be compared across runs.
pub fn strip_timing(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            for f in TIMING_FIELDS {
                m.remove(f);
            }
            m.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn booking_request_defaults_to_full_saga() {
        let r: BookingRequest = serde_json::from_str(
            r#"{"user_id":"u1","itinerary":{"slots":["a"]},"idempotency_key":"k"}"#,
        )
        .unwrap();
        assert!(r.auto_confirm);
        assert_eq!(r.itinerary.nights, 0);
        assert!(r.trip_request.is_none());
    }

    #[test]
    fn strip_timing_removes_nested_fields() {
        let mut v = serde_json::json!({"a": 1, "hold_expires_at_ms": 5, "b": [{"expires_at_ms": 1, "c": 2}]});
        strip_timing(&mut v);
        assert_eq!(v, serde_json::json!({"a": 1, "b": [{"c": 2}]}));
    }

    #[test]
    fn error_body_omits_empty_parts() {
        let s = serde_json::to_string(&ErrorBody::new("sold out")).unwrap();
        assert_eq!(s, r#"{"error":"sold out"}"#);
    }
}
