//! Core library of the resa travel-reservation testbed.
//!
//! Everything here is synchronous and pure: the domain model, seeded scenario
//! generation, price/demand forecasting, recommendation, the genetic itinerary
//! optimizer and carbon scoring. The service and bench crates build on top.

pub mod forecast;
pub mod histogram;
pub mod model;
pub mod optimizer;
pub mod recommend;
pub mod rng;
pub mod sustainability;
pub mod synthgen;
pub mod wire;

pub use model::{
    Catalog, FitnessWeights, Itinerary, ItineraryTotals, ModelError, OptionId, TransportKind,
    TravelOption, TripRequest, UserProfile, Violation,
};
