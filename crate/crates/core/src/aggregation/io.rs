//! JSON feature-scheme file format.
//!
//! ```json
//! {
//!   "features": [{"name": "a", "members": [0, 1], "disagg": [[0, 0.5], [1, 0.5]]}],
//!   "phi": [[2, 0, 1.0]]
//! }
//! ```
//!
//! `phi` entries are `[j, feature, w]`. Rows left out default to the
//! deterministic assignment of a state to the single feature containing it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::{Feature, FeatureScheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeFile {
    pub features: Vec<Feature>,
    #[serde(default)]
    pub phi: Vec<(usize, usize, f64)>,
}

impl SchemeFile {
    pub fn into_scheme(self, n: usize) -> Result<FeatureScheme> {
        FeatureScheme::new(n, self.features, &self.phi)
    }

    /// Writes every `phi` row that differs from the default assignment.
    pub fn from_scheme(scheme: &FeatureScheme) -> Self {
        let mut phi = Vec::new();
        let default =
            FeatureScheme::from_parts(scheme.num_states(), scheme.features().to_vec(), &[]);
        for j in 0..scheme.num_states() {
            if scheme.phi_row(j) != default.phi_row(j) {
                phi.extend(scheme.phi_row(j).iter().map(|&(y, w)| (j, y, w)));
            }
        }
        Self {
            features: scheme.features().to_vec(),
            phi,
        }
    }
}

impl FeatureScheme {
    pub fn from_json_str(n: usize, s: &str) -> Result<Self> {
        let file: SchemeFile = serde_json::from_str(s)?;
        file.into_scheme(n)
    }

    pub fn load(n: usize, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(n, &std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(&SchemeFile::from_scheme(self)).map_err(Error::from)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}
