use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::NhitsConfig;
use super::model::{NhitsDims, NhitsModel, TrainState};
use super::swag::SwagState;
use crate::error::{Error, Result};
use crate::ingest::csvio::write_atomic;
use crate::timeseries::Standardizer;

pub const CHECKPOINT_FORMAT: &str = "epf-nhits";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: NhitsConfig,
    dims: NhitsDims,
    state: TrainState,
    feature_names: Vec<String>,
    standardizer: Option<Standardizer>,
    params: Vec<f64>,
    swag: Option<SwagState>,
}

pub fn to_json(model: &NhitsModel) -> Result<String> {
    let c = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        dims: model.dims,
        state: model.state.clone(),
        feature_names: model.feature_names.clone(),
        standardizer: model.standardizer.clone(),
        params: model.params.clone(),
        swag: model.swag.clone(),
    };
    Ok(serde_json::to_string(&c)?)
}

pub fn from_json(text: &str) -> Result<NhitsModel> {
    let c: Checkpoint = serde_json::from_str(text)?;
    if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
        return Err(Error::domain(format!("unsupported checkpoint {} v{}", c.format, c.version)));
    }
    let mut m = NhitsModel::from_parts(c.config, c.dims, c.params)?;
    m.state = c.state;
    m.feature_names = c.feature_names;
    m.standardizer = c.standardizer;
    m.swag = c.swag;
    Ok(m)
}

pub fn save(model: &NhitsModel, path: &Path) -> Result<()> {
    write_atomic(path, &to_json(model)?)
}

pub fn load(path: &Path) -> Result<NhitsModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
