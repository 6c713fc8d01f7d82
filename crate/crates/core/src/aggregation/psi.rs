//! Belief aggregation rules: attributing a feature belief to grid points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::{FeatureBelief, GridIndex};
use crate::error::{Error, Result};

/// Scaled coordinates closer than this to an integer are treated as integral.
const SNAP: f64 = 1e-10;
/// Convex weights below this are dropped (and the rest renormalized).
const MIN_WEIGHT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiMode {
    /// All weight on the nearest grid point in max-norm.
    Hard,
    /// Barycentric weights over the vertices of the enclosing grid simplex.
    Convex,
}

impl PsiMode {
    pub fn weights(self, q: &FeatureBelief, rho: u32) -> Vec<(GridIndex, f64)> {
        match self {
            PsiMode::Hard => vec![(nearest_representative(q, rho), 1.0)],
            PsiMode::Convex => convex_weights(q, rho),
        }
    }
}

impl fmt::Display for PsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsiMode::Hard => "hard",
            PsiMode::Convex => "convex",
        })
    }
}

impl FromStr for PsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" | "nearest" => Ok(PsiMode::Hard),
            "convex" => Ok(PsiMode::Convex),
            _ => Err(Error::InvalidArgument(format!(
                "unknown psi mode '{s}' (expected nearest, hard or convex)"
            ))),
        }
    }
}

fn normalized(q: &FeatureBelief) -> Vec<(usize, f64)> {
    let total: f64 = q.entries().iter().map(|e| e.1).sum();
    q.entries()
        .iter()
        .filter(|e| e.1 > 0.0)
        .map(|&(x, w)| (x, w / total))
        .collect()
}

/// Grid point minimizing `max_x |q(x) - delta_x / rho|`.
///
/// Scales by `rho`, floors, then hands the leftover units to the coordinates
/// with the largest fractional parts (lowest feature index on ties).
pub fn nearest_representative(q: &FeatureBelief, rho: u32) -> GridIndex {
    let support = normalized(q);
    let r = rho as f64;
    let mut cells: Vec<(u32, u32, f64)> = support
        .iter()
        .map(|&(x, w)| {
            let t = (w * r).min(r);
            let fl = (t + SNAP).floor();
            (x as u32, fl as u32, (t - fl).max(0.0))
        })
        .collect();
    let assigned: i64 = cells.iter().map(|c| c.1 as i64).sum();
    let mut left = rho as i64 - assigned;
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[b].2.total_cmp(&cells[a].2).then(a.cmp(&b)));
    // `left` can only go negative or exceed the support size through rounding
    // noise in an almost-normalized input
    let mut pos = 0;
    while left > 0 && !order.is_empty() {
        cells[order[pos % order.len()]].1 += 1;
        left -= 1;
        pos += 1;
    }
    while left < 0 {
        let i = (0..cells.len())
            .filter(|&i| cells[i].1 > 0)
            .min_by(|&a, &b| cells[a].2.total_cmp(&cells[b].2))
            .expect("positive cell");
        cells[i].1 -= 1;
        left += 1;
    }
    let deltas = cells
        .into_iter()
        .filter(|c| c.1 > 0)
        .map(|c| (c.0, c.1))
        .collect();
    GridIndex::from_sorted_unchecked(rho, deltas)
}

/// Barycentric weights of `q` over the vertices of the Kuhn simplex that
/// contains it. Returns at most `support + 1` points, never more than the
/// number of features, and reconstructs `q` exactly up to rounding.
///
/// Works in cumulative coordinates `y_j = sum_{l >= j} delta_{s_l}` over the
/// support `s_1 < ... < s_m` of `q`, where the grid becomes the integer lattice
/// restricted to nonincreasing sequences.
pub fn convex_weights(q: &FeatureBelief, rho: u32) -> Vec<(GridIndex, f64)> {
    let support = normalized(q);
    let m = support.len();
    if m == 0 {
        return Vec::new();
    }
    let r = rho as f64;
    let mut t = vec![0.0; m];
    let mut acc = 0.0;
    for j in (0..m).rev() {
        acc += support[j].1;
        t[j] = (acc * r).min(r);
    }
    t[0] = r;
    let mut fl = vec![0u32; m];
    let mut frac = vec![0.0; m];
    for j in 0..m {
        let f = (t[j] + SNAP).floor();
        fl[j] = f as u32;
        let d = t[j] - f;
        frac[j] = if d < SNAP { 0.0 } else { d };
    }
    let mut levels: Vec<f64> = frac.iter().copied().filter(|&d| d > 0.0).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();

    let decode = |y: &[u32]| -> GridIndex {
        let mut deltas = Vec::with_capacity(m);
        for j in 0..m {
            let next = if j + 1 < m { y[j + 1] } else { 0 };
            let d = y[j] - next;
            if d > 0 {
                deltas.push((support[j].0 as u32, d));
            }
        }
        GridIndex::from_sorted_unchecked(rho, deltas)
    };

    let mut out: Vec<(GridIndex, f64)> = Vec::with_capacity(levels.len() + 1);
    let first = levels.first().copied().unwrap_or(0.0);
    out.push((decode(&fl), 1.0 - first));
    for (idx, &level) in levels.iter().enumerate() {
        let next = levels.get(idx + 1).copied().unwrap_or(0.0);
        let y: Vec<u32> = (0..m)
            .map(|j| fl[j] + u32::from(frac[j] >= level))
            .collect();
        out.push((decode(&y), level - next));
    }
    out.retain(|e| e.1 >= MIN_WEIGHT);
    let total: f64 = out.iter().map(|e| e.1).sum();
    for e in out.iter_mut() {
        e.1 /= total;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::enumerate_grid;

    fn fb(w: &[f64]) -> FeatureBelief {
        FeatureBelief::from_dense(w).unwrap()
    }

    #[test]
    fn nearest_examples() {
        let g = nearest_representative(&fb(&[0.26, 0.74]), 10);
        assert_eq!(g.to_dense(2), vec![3, 7]);
        let third = 1.0 / 3.0;
        let g = nearest_representative(&fb(&[third, third, third]), 3);
        assert_eq!(g.to_dense(3), vec![1, 1, 1]);
        let g = nearest_representative(&fb(&[0.5, 0.5]), 3);
        assert_eq!(g.to_dense(2), vec![2, 1]);
    }

    #[test]
    fn nearest_matches_exhaustive_search_on_a_small_grid() {
        let grid = enumerate_grid(4, 3).unwrap();
        for a in 0..=20 {
            for b in 0..=(20 - a) {
                let q = fb(&[a as f64 / 20.0, b as f64 / 20.0, (20 - a - b) as f64 / 20.0]);
                let best = grid
                    .iter()
                    .map(|g| q.max_norm_distance(g))
                    .fold(f64::INFINITY, f64::min);
                let got = q.max_norm_distance(&nearest_representative(&q, 4));
                assert!(got <= best + 1e-12, "{q:?}: {got} vs {best}");
            }
        }
    }

    #[test]
    fn convex_example() {
        let w = convex_weights(&fb(&[0.26, 0.74]), 10);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].0.to_dense(2), vec![3, 7]);
        assert!((w[0].1 - 0.6).abs() < 1e-12);
        assert_eq!(w[1].0.to_dense(2), vec![2, 8]);
        assert!((w[1].1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn convex_on_grid_point_is_single_vertex() {
        let w = convex_weights(&fb(&[0.2, 0.0, 0.8]), 5);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].0.to_dense(3), vec![1, 0, 4]);
        assert_eq!(w[0].1, 1.0);
    }

    #[test]
    fn convex_reconstructs_and_stays_on_face() {
        let q = fb(&[0.13, 0.0, 0.52, 0.35]);
        let w = convex_weights(&q, 7);
        assert!(w.len() <= 3);
        let mut rec = [0.0; 4];
        for (g, p) in &w {
            for (x, d) in g.to_dense(4).into_iter().enumerate() {
                rec[x] += p * d as f64 / 7.0;
            }
            assert_eq!(g.to_dense(4)[1], 0);
        }
        for (a, b) in rec.iter().zip(q.to_dense()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parses_modes() {
        assert_eq!("nearest".parse::<PsiMode>().unwrap(), PsiMode::Hard);
        assert_eq!("convex".parse::<PsiMode>().unwrap(), PsiMode::Convex);
        assert!("soft".parse::<PsiMode>().is_err());
        assert_eq!(serde_json::to_string(&PsiMode::Hard).unwrap(), "\"hard\"");
    }
}
