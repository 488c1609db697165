//! Layered run configuration: defaults, then an optional JSON file, then
//! command-line flags.

use std::path::Path;

use fdanet::model::ModelConfig;
use fdanet::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::{Failure, TrainArgs};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub fn preset(name: &str) -> Result<ModelConfig, Failure> {
    match name {
        "default" => Ok(ModelConfig::default()),
        "tiny" => Ok(ModelConfig::tiny()),
        other => Err(Failure::usage(format!("unknown preset `{other}` (expected default or tiny)"))),
    }
}

pub fn read_file(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text).map_err(fdanet::Error::from)?)
}

/// Resolves the effective configuration and a one-line note of which
/// layers contributed.
pub fn resolve(args: &TrainArgs) -> Result<(RunConfig, String), Failure> {
    let mut layers = vec!["defaults".to_string()];
    let mut cfg = match &args.config {
        Some(path) => {
            layers.push(format!("file {}", path.display()));
            read_file(path)?
        }
        None => RunConfig::default(),
    };
    let mut flags = Vec::new();
    if let Some(p) = &args.preset {
        cfg.model = preset(p)?;
        flags.push("--preset");
    }
    macro_rules! flag {
        ($field:ident, $name:literal) => {
            if let Some(v) = args.$field {
                cfg.train.$field = v;
                flags.push($name);
            }
        };
    }
    flag!(steps, "--steps");
    flag!(lr, "--lr");
    flag!(seed, "--seed");
    flag!(batch_size, "--batch-size");
    flag!(crop_size, "--crop-size");
    flag!(eval_every, "--eval-every");
    flag!(attention, "--attention");
    if !flags.is_empty() {
        layers.push(format!("flags {}", flags.join(" ")));
    }
    cfg.model.validate()?;
    cfg.train.validate()?;
    Ok((cfg, layers.join(" < ")))
}

pub fn parse_dims<const N: usize>(text: &str, what: &str) -> Result<[usize; N], Failure> {
    let parts: Vec<usize> = text
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::usage(format!("{what} `{text}` is not a list of integers separated by x")))?;
    parts.try_into().map_err(|_| Failure::usage(format!("{what} `{text}` must have {N} extents")))
}
