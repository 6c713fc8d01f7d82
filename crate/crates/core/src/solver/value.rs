use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::{GridIndex, PsiMode};
use crate::error::{Error, Result};

/// Value-iteration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Jacobi sweeps: every component updated from the previous iterate.
    Sync,
    /// Gauss-Seidel sweeps: one component at a time, in table order.
    Async,
}

/// How the table of representative beliefs is populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expansion {
    /// Enumerate the whole grid.
    Eager,
    /// Closure of the seeds under the aggregate transition map.
    Lazy,
}

macro_rules! name_enum {
    ($t:ty, $what:literal, $($v:path => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($v => $s),+ })
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(Error::InvalidArgument(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }
    };
}

name_enum!(Mode, "solver mode", Mode::Sync => "sync", Mode::Async => "async");
name_enum!(Expansion, "expansion", Expansion::Eager => "eager", Expansion::Lazy => "lazy");

/// Solved (or partially solved) aggregate values `r` keyed by grid point.
#[derive(Debug, Clone)]
pub struct AggregateValue {
    num_features: usize,
    rho: u32,
    psi_mode: PsiMode,
    mode: Mode,
    members: Vec<GridIndex>,
    values: Vec<f64>,
    index: HashMap<GridIndex, usize>,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    /// `||Hr - r||_inf` of the returned table (NaN if not computed).
    pub bellman_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bias_tag: Option<String>,
    /// Sup-norm change of every sweep, in order (not serialized).
    pub history: Vec<f64>,
}

impl AggregateValue {
    pub fn new(
        num_features: usize,
        rho: u32,
        psi_mode: PsiMode,
        mode: Mode,
        members: Vec<GridIndex>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if members.len() != values.len() {
            return Err(Error::InvalidArgument(
                "members and values differ in length".into(),
            ));
        }
        let mut index = HashMap::with_capacity(members.len());
        for (i, g) in members.iter().enumerate() {
            if !g.is_valid_for(num_features, rho) {
                return Err(Error::InvalidArgument(format!(
                    "invalid grid point {:?}",
                    g.entries()
                )));
            }
            if index.insert(g.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "repeated grid point {:?}",
                    g.entries()
                )));
            }
        }
        Ok(Self {
            num_features,
            rho,
            psi_mode,
            mode,
            members,
            values,
            index,
            residual: 0.0,
            bellman_residual: f64::NAN,
            iterations: 0,
            converged: false,
            bias_tag: None,
            history: Vec::new(),
        })
    }

    /// Zero-valued table over the given members.
    pub fn zeros(
        num_features: usize,
        rho: u32,
        psi_mode: PsiMode,
        mode: Mode,
        members: Vec<GridIndex>,
    ) -> Result<Self> {
        let values = vec![0.0; members.len()];
        Self::new(num_features, rho, psi_mode, mode, members, values)
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn rho(&self) -> u32 {
        self.rho
    }

    pub fn psi_mode(&self) -> PsiMode {
        self.psi_mode
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[GridIndex] {
        &self.members
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, g: &GridIndex) -> Option<f64> {
        self.index.get(g).map(|&i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GridIndex, f64)> {
        self.members.iter().zip(self.values.iter().copied())
    }

    /// Sup-norm distance to another table over the same members; members
    /// missing from `other` count as an infinite difference.
    pub fn max_difference(&self, other: &AggregateValue) -> f64 {
        self.iter()
            .map(|(g, v)| other.get(g).map_or(f64::INFINITY, |w| (v - w).abs()))
            .fold(0.0, f64::max)
    }

    pub(crate) fn push(&mut self, g: GridIndex, v: f64) {
        if !self.index.contains_key(&g) {
            self.index.insert(g.clone(), self.members.len());
            self.members.push(g);
            self.values.push(v);
        }
    }

    pub(crate) fn set_values(&mut self, values: Vec<f64>) {
        assert_eq!(values.len(), self.members.len());
        self.values = values;
    }

    pub fn to_file(&self) -> SolutionFile {
        SolutionFile {
            rho: self.rho,
            psi_mode: self.psi_mode,
            num_features: self.num_features,
            mode: self.mode,
            entries: self
                .iter()
                .map(|(g, v)| (g.to_dense(self.num_features), v))
                .collect(),
            residual: self.residual,
            bellman_residual: if self.bellman_residual.is_finite() {
                Some(self.bellman_residual)
            } else {
                None
            },
            iterations: self.iterations,
            converged: self.converged,
            bias_tag: self.bias_tag.clone(),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: SolutionFile = serde_json::from_str(s)?;
        file.into_value()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Serialized form of an [`AggregateValue`]; each entry is a dense `delta`
/// vector and its value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub rho: u32,
    pub psi_mode: PsiMode,
    pub num_features: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub entries: Vec<(Vec<u32>, f64)>,
    pub residual: f64,
    #[serde(default)]
    pub bellman_residual: Option<f64>,
    pub iterations: usize,
    #[serde(default = "default_true")]
    pub converged: bool,
    #[serde(default)]
    pub bias_tag: Option<String>,
}

fn default_mode() -> Mode {
    Mode::Sync
}

fn default_true() -> bool {
    true
}

impl SolutionFile {
    pub fn into_value(self) -> Result<AggregateValue> {
        let mut members = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        for (dense, v) in self.entries {
            if dense.len() != self.num_features {
                return Err(Error::InvalidArgument(format!(
                    "entry has {} coordinates, expected {}",
                    dense.len(),
                    self.num_features
                )));
            }
            members.push(GridIndex::new(self.rho, &dense)?);
            values.push(v);
        }
        let mut out = AggregateValue::new(
            self.num_features,
            self.rho,
            self.psi_mode,
            self.mode,
            members,
            values,
        )?;
        out.residual = self.residual;
        out.bellman_residual = self.bellman_residual.unwrap_or(f64::NAN);
        out.iterations = self.iterations;
        out.converged = self.converged;
        out.bias_tag = self.bias_tag;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solution_round_trip() {
        let members = vec![
            GridIndex::new(2, &[2, 0]).unwrap(),
            GridIndex::new(2, &[1, 1]).unwrap(),
        ];
        let mut v = AggregateValue::new(
            2,
            2,
            PsiMode::Convex,
            Mode::Async,
            members,
            vec![-1.5, 0.25],
        )
        .unwrap();
        v.residual = 1e-10;
        v.iterations = 7;
        v.converged = true;
        v.bias_tag = Some("coarse".into());
        let back = AggregateValue::from_json_str(&v.to_json_string().unwrap()).unwrap();
        assert_eq!(back.members(), v.members());
        assert_eq!(back.values(), v.values());
        assert_eq!(back.psi_mode(), PsiMode::Convex);
        assert_eq!(back.mode(), Mode::Async);
        assert_eq!(back.iterations, 7);
        assert_eq!(back.bias_tag.as_deref(), Some("coarse"));
    }

    #[test]
    fn rejects_invalid_tables() {
        let g = GridIndex::new(2, &[2, 0]).unwrap();
        assert!(AggregateValue::new(
            2,
            2,
            PsiMode::Hard,
            Mode::Sync,
            vec![g.clone(), g.clone()],
            vec![0.0; 2]
        )
        .is_err());
        assert!(AggregateValue::new(2, 3, PsiMode::Hard, Mode::Sync, vec![g], vec![0.0]).is_err());
        assert_eq!("async".parse::<Mode>().unwrap(), Mode::Async);
        assert!("later".parse::<Expansion>().is_err());
    }
}
