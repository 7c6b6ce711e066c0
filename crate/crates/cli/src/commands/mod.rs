pub mod contours;
pub mod geometry;
pub mod lightcone;
pub mod secondlaw;

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::Failure;

/// Loads a strict-schema JSON config; unknown fields are rejected by the
/// target types themselves.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))
}
