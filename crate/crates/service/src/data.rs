//! Read-only scenario state loaded at process start.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use resa_core::forecast::{TrainedModels, MODELS_FILE};
use resa_core::recommend::RatingMatrix;
use resa_core::synthgen::{ScenarioBundle, ScenarioParams, SynthError};
use resa_core::{Catalog, UserProfile};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("missing scenario: {0}")]
    Scenario(#[from] SynthError),
    #[error("unreadable {path}: {msg}")]
    Models { path: String, msg: String },
}

#[derive(Debug)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub catalog: Catalog,
    pub users: Vec<UserProfile>,
    user_index: HashMap<String, usize>,
    pub matrix: RatingMatrix,
    /// Absent until `resa train` has written `models.json`.
    pub models: Option<TrainedModels>,
}

impl Scenario {
    pub fn new(params: ScenarioParams, catalog: Catalog, users: Vec<UserProfile>, models: Option<TrainedModels>) -> Self {
        let user_index = users.iter().enumerate().map(|(i, u)| (u.user_id.clone(), i)).collect();
        let matrix = RatingMatrix::build(&users, &catalog);
        Scenario {
            params,
            catalog,
            users,
            user_index,
            matrix,
            models,
        }
    }

    pub fn from_bundle(bundle: ScenarioBundle, models: Option<TrainedModels>) -> Self {
        Self::new(bundle.meta.params, bundle.catalog, bundle.users, models)
    }

    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let bundle = ScenarioBundle::read(dir)?;
        let path = dir.join(MODELS_FILE);
        let models = match fs::read(&path) {
            Ok(bytes) => Some(serde_json::from_slice(&bytes).map_err(|e| DataError::Models {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => {
                return Err(DataError::Models {
                    path: path.display().to_string(),
                    msg: e.to_string(),
                })
            }
        };
        Ok(Self::from_bundle(bundle, models))
    }

    pub fn user(&self, id: &str) -> Option<&UserProfile> {
        self.user_index.get(id).map(|&i| &self.users[i])
    }
}
