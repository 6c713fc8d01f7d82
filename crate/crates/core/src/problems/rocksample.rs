//! RockSample: a rover on an `n x n` grid with `k` rocks of unknown quality.
//!
//! State index is `cell * 2^k + rocks`, where `cell = y * n + x` and bit `r`
//! of `rocks` is set while rock `r` is good; index `n^2 * 2^k` is the terminal
//! state reached by driving off the east edge. Controls are north, east,
//! south, west, sample, then one check per rock. Checking rock `r` at distance
//! `d` returns its true quality with probability `(1 + 2^(-d / d0)) / 2`.
//! Costs are negated rewards.

use std::str::FromStr;

use crate::aggregation::{Feature, FeatureScheme};
use crate::error::{Error, Result};
use crate::pomdp::{Belief, PomdpBuilder, TabularPomdp};

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;
pub const SAMPLE: usize = 4;

pub const OBS_NONE: usize = 0;
pub const OBS_GOOD: usize = 1;
pub const OBS_BAD: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct RockSampleSpec {
    pub size: usize,
    /// Rock positions as `(x, y)`.
    pub rocks: Vec<(usize, usize)>,
    pub start: (usize, usize),
    /// Distance at which a check is correct with probability 0.75.
    pub half_efficiency_distance: f64,
    pub exit_reward: f64,
    pub good_reward: f64,
    pub bad_penalty: f64,
    pub move_cost: f64,
    pub check_cost: f64,
    pub discount: f64,
}

impl RockSampleSpec {
    /// Standard instance with fixed rock layouts for the usual sizes.
    pub fn standard(size: usize, rocks: usize) -> Result<Self> {
        let layout: &[(usize, usize)] = match (size, rocks) {
            (4, 4) => &[(0, 0), (1, 3), (2, 1), (3, 2)],
            (5, 5) => &[(0, 1), (1, 3), (2, 0), (3, 4), (4, 2)],
            (5, 7) => &[(0, 1), (1, 3), (2, 0), (3, 4), (4, 2), (1, 1), (3, 2)],
            (7, 8) => &[
                (0, 1),
                (1, 5),
                (2, 2),
                (3, 6),
                (4, 0),
                (5, 3),
                (6, 5),
                (2, 4),
            ],
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "no standard layout for RockSample({size},{rocks})"
                )))
            }
        };
        Ok(Self {
            size,
            rocks: layout.to_vec(),
            start: (0, size / 2),
            half_efficiency_distance: 20.0,
            exit_reward: 10.0,
            good_reward: 10.0,
            bad_penalty: 10.0,
            move_cost: 0.0,
            check_cost: 0.0,
            discount: 0.95,
        })
    }

    pub fn num_rocks(&self) -> usize {
        self.rocks.len()
    }

    pub fn num_states(&self) -> usize {
        self.size * self.size * (1 << self.num_rocks()) + 1
    }

    pub fn terminal(&self) -> usize {
        self.num_states() - 1
    }

    pub fn state(&self, x: usize, y: usize, rocks: usize) -> usize {
        ((y * self.size + x) << self.num_rocks()) | rocks
    }

    /// `(x, y, rocks)` of a non-terminal state.
    pub fn decode(&self, s: usize) -> (usize, usize, usize) {
        let k = self.num_rocks();
        let cell = s >> k;
        (cell % self.size, cell / self.size, s & ((1 << k) - 1))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_rocks();
        if self.size == 0 || k > 16 {
            return Err(Error::InvalidArgument(
                "grid must be nonempty with at most 16 rocks".into(),
            ));
        }
        if self.num_states() > 10_000_000 {
            return Err(Error::InvalidArgument(
                "RockSample instance too large to tabulate".into(),
            ));
        }
        let inside = |&(x, y): &(usize, usize)| x < self.size && y < self.size;
        if !inside(&self.start) || !self.rocks.iter().all(inside) {
            return Err(Error::InvalidArgument(
                "positions must lie inside the grid".into(),
            ));
        }
        for (a, p) in self.rocks.iter().enumerate() {
            if self.rocks[..a].contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "two rocks share cell {p:?}"
                )));
            }
        }
        if !(self.discount > 0.0 && self.discount < 1.0) || !(self.half_efficiency_distance > 0.0) {
            return Err(Error::InvalidArgument(
                "discount must lie in (0, 1) and d0 be positive".into(),
            ));
        }
        Ok(())
    }

    /// Probability that checking rock `r` from `(x, y)` reports its true quality.
    pub fn check_accuracy(&self, x: usize, y: usize, r: usize) -> f64 {
        let (rx, ry) = self.rocks[r];
        let d = ((x as f64 - rx as f64).powi(2) + (y as f64 - ry as f64).powi(2)).sqrt();
        (1.0 + (-d / self.half_efficiency_distance).exp2()) / 2.0
    }

    /// Rover at the start cell, rock qualities independent and uniform.
    pub fn initial_belief(&self) -> Belief {
        let k = self.num_rocks();
        let w = 1.0 / (1usize << k) as f64;
        let (x, y) = self.start;
        Belief::new(
            self.num_states(),
            (0..1usize << k).map(|r| (self.state(x, y, r), w)),
        )
        .expect("uniform belief")
    }
}

pub fn build_rocksample(spec: &RockSampleSpec) -> Result<TabularPomdp> {
    spec.validate()?;
    let n = spec.size;
    let k = spec.num_rocks();
    let mut controls: Vec<String> = ["north", "east", "south", "west", "sample"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    controls.extend((1..=k).map(|r| format!("check {r}")));
    let mut b = PomdpBuilder::new(
        spec.num_states(),
        controls,
        vec!["none".into(), "good".into(), "bad".into()],
        spec.discount,
    );
    let t = spec.terminal();
    let num_controls = SAMPLE + 1 + k;
    for u in 0..num_controls {
        b.transition_observed(u, t, t, 1.0, OBS_NONE);
    }
    for y in 0..n {
        for x in 0..n {
            for rocks in 0..1usize << k {
                let s = spec.state(x, y, rocks);
                let moves = [
                    (NORTH, (y + 1 < n).then(|| spec.state(x, y + 1, rocks))),
                    (EAST, (x + 1 < n).then(|| spec.state(x + 1, y, rocks))),
                    (SOUTH, (y > 0).then(|| spec.state(x, y - 1, rocks))),
                    (WEST, (x > 0).then(|| spec.state(x - 1, y, rocks))),
                ];
                for (u, dest) in moves {
                    match dest {
                        Some(j) => {
                            b.transition_observed(u, s, j, 1.0, OBS_NONE).cost(
                                s,
                                u,
                                j,
                                spec.move_cost,
                            );
                        }
                        None if u == EAST => {
                            b.transition_observed(u, s, t, 1.0, OBS_NONE).cost(
                                s,
                                u,
                                t,
                                spec.move_cost - spec.exit_reward,
                            );
                        }
                        None => {
                            b.transition_observed(u, s, s, 1.0, OBS_NONE).cost(
                                s,
                                u,
                                s,
                                spec.move_cost,
                            );
                        }
                    }
                }
                match spec.rocks.iter().position(|&p| p == (x, y)) {
                    Some(r) if rocks >> r & 1 == 1 => {
                        let j = s & !(1 << r);
                        b.transition_observed(SAMPLE, s, j, 1.0, OBS_NONE).cost(
                            s,
                            SAMPLE,
                            j,
                            -spec.good_reward,
                        );
                    }
                    Some(_) => {
                        b.transition_observed(SAMPLE, s, s, 1.0, OBS_NONE).cost(
                            s,
                            SAMPLE,
                            s,
                            spec.bad_penalty,
                        );
                    }
                    None => {
                        b.transition_observed(SAMPLE, s, s, 1.0, OBS_NONE);
                    }
                }
                for r in 0..k {
                    let u = SAMPLE + 1 + r;
                    let acc = spec.check_accuracy(x, y, r);
                    let (truth, lie) = if rocks >> r & 1 == 1 {
                        (OBS_GOOD, OBS_BAD)
                    } else {
                        (OBS_BAD, OBS_GOOD)
                    };
                    b.transition_observed(u, s, s, acc, truth);
                    if acc < 1.0 {
                        b.transition_observed(u, s, s, 1.0 - acc, lie);
                    }
                    b.cost(s, u, s, spec.check_cost);
                }
            }
        }
    }
    b.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RockSampleFeatures {
    /// One feature per state.
    Identity,
    /// Rover position coarsened to a 3 x 3 grid of blocks, rock qualities
    /// kept exactly; the terminal state is its own feature.
    Grid3x3,
}

impl FromStr for RockSampleFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "flat" => Ok(Self::Identity),
            "grid3x3" => Ok(Self::Grid3x3),
            _ => Err(Error::InvalidArgument(format!(
                "unknown RockSample features '{s}' (expected identity or grid3x3)"
            ))),
        }
    }
}

pub fn rs_feature_scheme(spec: &RockSampleSpec, mode: RockSampleFeatures) -> Result<FeatureScheme> {
    spec.validate()?;
    match mode {
        RockSampleFeatures::Identity => Ok(FeatureScheme::flat(spec.num_states())),
        RockSampleFeatures::Grid3x3 => {
            let k = spec.num_rocks();
            let n = spec.size;
            let blocks = n.min(3);
            let block = |c: usize| c * blocks / n;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); blocks * blocks * (1 << k) + 1];
            for s in 0..spec.terminal() {
                let (x, y, rocks) = spec.decode(s);
                members[((block(y) * blocks + block(x)) << k) | rocks].push(s);
            }
            let last = members.len() - 1;
            members[last].push(spec.terminal());
            let features = members
                .into_iter()
                .enumerate()
                .map(|(f, m)| {
                    let name = if f == last {
                        "terminal".to_string()
                    } else {
                        let cell = f >> k;
                        format!(
                            "block ({},{}) rocks {:0width$b}",
                            cell % blocks,
                            cell / blocks,
                            f & ((1 << k) - 1),
                            width = k
                        )
                    };
                    Feature::uniform(name, m)
                })
                .collect();
            FeatureScheme::new(spec.num_states(), features, &[])
        }
    }
}
