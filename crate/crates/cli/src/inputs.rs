//! Resolution of problem, feature-scheme, belief and bias arguments.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use beliefagg::aggregation::FeatureScheme;
use beliefagg::policy::CostApprox;
use beliefagg::pomdp::{Belief, TabularPomdp};
use beliefagg::problems::Preset;
use beliefagg::solver::{AggregateValue, BiasFunction};

use crate::ConfigError;

/// A loaded model together with the preset it came from, if any.
pub struct Problem {
    pub name: String,
    pub model: TabularPomdp,
    pub preset: Option<Preset>,
}

impl Problem {
    /// `source` is a preset name such as `treasure:N=3` or a path to a JSON
    /// problem file.
    pub fn load(source: &str) -> Result<Self> {
        if Path::new(source).is_file() {
            let model = TabularPomdp::load(source)
                .with_context(|| format!("reading problem file {source}"))
                .map_err(ConfigError::wrap_any)?;
            return Ok(Self {
                name: source.to_string(),
                model,
                preset: None,
            });
        }
        let preset: Preset = source.parse().map_err(ConfigError::wrap)?;
        let model = preset.build().map_err(ConfigError::wrap)?;
        Ok(Self {
            name: source.to_string(),
            model,
            preset: Some(preset),
        })
    }

    pub fn num_states(&self) -> usize {
        self.model.num_states()
    }

    /// A preset scheme name, `flat`, or a path to a JSON scheme file. With
    /// `None` the preset's default (or `flat` for file problems) is used.
    pub fn scheme(&self, source: Option<&str>) -> Result<FeatureScheme> {
        match source {
            Some(s) if Path::new(s).is_file() => FeatureScheme::load(self.num_states(), s)
                .with_context(|| format!("reading feature scheme {s}"))
                .map_err(ConfigError::wrap_any),
            Some("flat") | Some("identity") => Ok(FeatureScheme::flat(self.num_states())),
            Some(name) => match &self.preset {
                Some(p) => p.feature_scheme(name).map_err(ConfigError::wrap),
                None => bail!(ConfigError(format!(
                    "'{name}' is neither a scheme file nor 'flat'; named schemes need a preset problem"
                ))),
            },
            None => match &self.preset {
                Some(p) => p.feature_scheme(p.default_features()).map_err(ConfigError::wrap),
                None => Ok(FeatureScheme::flat(self.num_states())),
            },
        }
    }

    /// `initial` (the preset's starting belief, uniform for file problems),
    /// `uniform`, `state:I`, or a path to a JSON array of state weights.
    pub fn belief(&self, source: &str) -> Result<Belief> {
        let n = self.num_states();
        match source {
            "initial" => Ok(match &self.preset {
                Some(p) => p.initial_belief(),
                None => uniform(n),
            }),
            "uniform" => Ok(uniform(n)),
            s if s.starts_with("state:") => {
                let i: usize = s["state:".len()..]
                    .parse()
                    .map_err(|_| ConfigError(format!("bad state index in '{s}'")))?;
                if i >= n {
                    bail!(ConfigError(format!(
                        "state {i} out of range for {n} states"
                    )));
                }
                Ok(Belief::point(n, i))
            }
            path if Path::new(path).is_file() => {
                let text = std::fs::read_to_string(path)?;
                let weights: Vec<f64> = serde_json::from_str(&text)
                    .with_context(|| format!("parsing belief file {path}"))?;
                if weights.len() != n {
                    bail!(ConfigError(format!(
                        "belief file has {} entries, model has {n} states",
                        weights.len()
                    )));
                }
                Belief::from_dense(&weights).map_err(ConfigError::wrap)
            }
            other => bail!(ConfigError(format!(
                "unknown belief '{other}' (expected initial, uniform, state:I or a JSON file)"
            ))),
        }
    }
}

fn uniform(n: usize) -> Belief {
    let all: Vec<usize> = (0..n).collect();
    Belief::uniform(n, &all).expect("nonempty state space")
}

pub fn load_solution(path: &Path) -> Result<AggregateValue> {
    if !path.is_file() {
        bail!(ConfigError(format!(
            "solution file {} not found",
            path.display()
        )));
    }
    AggregateValue::load(path)
        .with_context(|| format!("reading solution file {}", path.display()))
        .map_err(ConfigError::wrap_any)
}

/// A bias function read from an unbiased solution file over `scheme`.
pub fn load_bias(path: &Path, scheme: FeatureScheme) -> Result<BiasFunction> {
    let solution = load_solution(path)?;
    if let Some(tag) = &solution.bias_tag {
        bail!(ConfigError(format!(
            "bias source {} was itself solved with bias '{tag}'; nested bias is not supported",
            path.display()
        )));
    }
    let tag = format!("solution {}", path.display());
    let approx = CostApprox::new(scheme, solution, None).map_err(ConfigError::wrap)?;
    Ok(Arc::new(approx).into_bias(tag))
}

/// `explicit` if given, otherwise `name` inside the output directory.
pub fn output_path(explicit: Option<&Path>, out_dir: Option<&Path>, name: &str) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    let dir = out_dir.unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir.join(name))
}
