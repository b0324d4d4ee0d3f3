//! Experiment presets shipped with the crate.

use crate::experiment::ExperimentSpec;
use crate::{Error, Result};

const PRESETS: [(&str, &str); 6] = [
    ("ridge", include_str!("../presets/ridge.toml")),
    ("compressible", include_str!("../presets/compressible.toml")),
    ("elliptic", include_str!("../presets/elliptic.toml")),
    ("kdv", include_str!("../presets/kdv.toml")),
    ("highdim", include_str!("../presets/highdim.toml")),
    ("coherence", include_str!("../presets/coherence.toml")),
];

pub fn list() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

/// Raw TOML text of a preset.
pub fn source(id: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|p| p.0 == id)
        .map(|p| p.1)
        .ok_or_else(|| Error::UnknownPreset(id.to_string()))
}

pub fn load(id: &str) -> Result<ExperimentSpec> {
    ExperimentSpec::from_toml(source(id)?)
}
