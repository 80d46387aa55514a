#![allow(dead_code)]

use std::sync::Arc;

use resa_client::Client;
use resa_core::forecast::{train_models, TrainConfig};
use resa_core::synthgen::{gen_scenario, ScenarioParams};
use resa_core::{OptionId, TravelOption};
use resa_service::{Deployment, DeploymentSpec, Mode, Scenario, Spawner, WorkModel};

pub const TOKEN: &str = "test-token";

pub fn params(seed: u64) -> ScenarioParams {
    ScenarioParams {
        seed,
        n_cities: 3,
        n_users: 12,
        ..Default::default()
    }
}

pub fn scenario(p: &ScenarioParams) -> Arc<Scenario> {
    let b = gen_scenario(p).unwrap();
    let models = train_models(&b.history, &TrainConfig::default()).unwrap();
    Arc::new(Scenario::from_bundle(b, Some(models)))
}

pub fn spec(mode: Mode) -> DeploymentSpec {
    DeploymentSpec {
        work: WorkModel::zero(),
        auth_token: TOKEN.into(),
        shutdown_grace_ms: 500,
        ..DeploymentSpec::new(mode)
    }
}

pub fn deploy(spec: &DeploymentSpec, s: &Arc<Scenario>) -> Deployment {
    Deployment::start(
        spec,
        &Spawner::InProcess {
            scenario: s.clone(),
            worker_threads: 2,
        },
    )
    .unwrap()
}

pub fn client(d: &Deployment) -> Client {
    Client::new(d.url(), Some(TOKEN.into()))
}

pub fn first_transport(s: &Scenario) -> TravelOption {
    let mut legs: Vec<_> = s.catalog.options().iter().filter(|o| o.kind.is_transport()).collect();
    legs.sort_by(|a, b| a.id.cmp(&b.id));
    legs[0].clone()
}

pub fn one_leg(id: &OptionId) -> resa_core::Itinerary {
    resa_core::Itinerary {
        slots: vec![id.clone()],
        nights: 0,
    }
}
