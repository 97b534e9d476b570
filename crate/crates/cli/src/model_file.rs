//! JSON model files.
//!
//! ```json
//! {"species": [{"label": "s", "lambda": 0.5, "p": 1},
//!              {"label": "t", "lambda": 0.5, "p": 1}],
//!  "metadata": {"note": "free-form"}}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs;

use msglass::ModelSpec;
use serde::Deserialize;

use crate::CliError;

const SUM_EXACT: f64 = 1e-9;
const SUM_RENORMALIZE: f64 = 1e-6;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigFile {
    pub species: Vec<SpeciesEntry>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesEntry {
    pub label: String,
    pub lambda: f64,
    pub p: i64,
}

/// Reads `arg` as inline JSON if it starts with `{`, as a path otherwise.
pub fn load_model(arg: &str) -> Result<ModelSpec, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg)
            .map_err(|e| CliError::Input(format!("cannot read model file {arg}: {e}")))?
    };
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<ModelSpec, CliError> {
    let file: ModelConfigFile = serde_json::from_str(text)
        .map_err(|e| CliError::Input(format!("malformed model JSON: {e}")))?;
    for (key, value) in &file.metadata {
        log::debug!("model metadata {key} = {value}");
    }
    if file.species.len() < 2 {
        return Err(CliError::Input(format!(
            "species: need at least two species, got {}",
            file.species.len()
        )));
    }

    let mut seen = HashSet::new();
    let mut labels = Vec::with_capacity(file.species.len());
    let mut lambda = Vec::with_capacity(file.species.len());
    let mut degrees = Vec::with_capacity(file.species.len());
    for entry in &file.species {
        if !seen.insert(entry.label.as_str()) {
            return Err(CliError::Input(format!(
                "label: duplicate label {:?}",
                entry.label
            )));
        }
        if !(entry.lambda > 0.0 && entry.lambda < 1.0) {
            return Err(CliError::Input(format!(
                "lambda: species {:?} has lambda = {}, outside (0,1)",
                entry.label, entry.lambda
            )));
        }
        if entry.p < 1 || entry.p > u32::MAX as i64 {
            return Err(CliError::Input(format!(
                "p: species {:?} has p = {}, need p >= 1",
                entry.label, entry.p
            )));
        }
        labels.push(entry.label.clone());
        lambda.push(entry.lambda);
        degrees.push(entry.p as u32);
    }

    let sum: f64 = lambda.iter().sum();
    let gap = (sum - 1.0).abs();
    if gap > SUM_RENORMALIZE {
        return Err(CliError::Input(format!("lambda sums to {sum}, expected 1")));
    }
    if gap > SUM_EXACT {
        log::warn!("lambda sums to {sum}; renormalizing");
    }
    if gap > 0.0 {
        lambda.iter_mut().for_each(|l| *l /= sum);
    }

    ModelSpec::new(labels, lambda, degrees).map_err(|e| CliError::Input(e.to_string()))
}
