//! Built-in problem families and the particle-filter belief estimator.

mod particle;
mod rocksample;
mod treasure;

use std::str::FromStr;

pub use particle::{
    particle_update, ParticleEstimator, ParticleSet, DEFAULT_PARTICLES, REJECTION_CAP_PER_PARTICLE,
};
pub use rocksample::{
    build_rocksample, rs_feature_scheme, RockSampleFeatures, RockSampleSpec, EAST, NORTH, OBS_BAD,
    OBS_GOOD, OBS_NONE, SAMPLE, SOUTH, WEST,
};
pub use treasure::{
    build_treasure, optimal_cost_product, product_marginals, treasure_feature_scheme,
    TreasureFeatures, TreasureSpec, FAILURE, MAX_SITES, REFERENCE_COSTS, REFERENCE_DETECTION,
    REFERENCE_DISCOUNT, REFERENCE_VALUES, SUCCESS,
};

use crate::aggregation::FeatureScheme;
use crate::error::{Error, Result};
use crate::pomdp::{Belief, TabularPomdp};

/// A named built-in problem: `treasure:N=3`, `rocksample:4x4`, `rocksample:5x5`
/// or `rocksample:5x7`.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Treasure(TreasureSpec),
    RockSample(RockSampleSpec),
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("treasure:") {
            let sites = rest
                .strip_prefix("N=")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("expected treasure:N=<sites>, got '{s}'"))
                })?;
            return Ok(Preset::Treasure(TreasureSpec::reference(sites)?));
        }
        if let Some(rest) = s.strip_prefix("rocksample:") {
            let (rocks, size) = match rest {
                "4x4" => (4, 4),
                "5x5" => (5, 5),
                "5x7" => (7, 5),
                "7x8" => (8, 7),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown RockSample preset '{s}'"
                    )))
                }
            };
            return Ok(Preset::RockSample(RockSampleSpec::standard(size, rocks)?));
        }
        Err(Error::InvalidArgument(format!(
            "unknown problem preset '{s}'"
        )))
    }
}

impl Preset {
    pub fn build(&self) -> Result<TabularPomdp> {
        match self {
            Preset::Treasure(spec) => build_treasure(spec),
            Preset::RockSample(spec) => build_rocksample(spec),
        }
    }

    /// Default starting belief: every site holds a treasure, or the rover at
    /// its start cell with uniformly unknown rocks.
    pub fn initial_belief(&self) -> Belief {
        match self {
            Preset::Treasure(spec) => spec.all_present(),
            Preset::RockSample(spec) => spec.initial_belief(),
        }
    }

    /// Feature scheme by name (`max-value`, `max-value-single`, `grouped:L`, `flat` for treasure;
    /// `identity`, `grid3x3` for RockSample).
    pub fn feature_scheme(&self, name: &str) -> Result<FeatureScheme> {
        match self {
            Preset::Treasure(spec) => treasure_feature_scheme(spec, name.parse()?),
            Preset::RockSample(spec) => rs_feature_scheme(spec, name.parse()?),
        }
    }

    pub fn default_features(&self) -> &'static str {
        match self {
            Preset::Treasure(_) => "max-value",
            Preset::RockSample(_) => "identity",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_presets() {
        let p: Preset = "treasure:N=2".parse().unwrap();
        assert_eq!(p.build().unwrap().num_states(), 5);
        let p: Preset = "rocksample:5x7".parse().unwrap();
        assert!(matches!(&p, Preset::RockSample(s) if s.num_states() == 3201));
        assert!("treasure:3".parse::<Preset>().is_err());
        assert!("maze".parse::<Preset>().is_err());
        assert!(p.feature_scheme("max-value").is_err());
    }
}
