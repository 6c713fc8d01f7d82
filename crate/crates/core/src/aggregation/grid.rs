use crate::aggregation::PsiMode;
use crate::error::{Error, Result};
use crate::pomdp::belief::merge_sorted;
use crate::pomdp::BELIEF_SUM_TOLERANCE;

/// Probability distribution over feature states, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBelief {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureBelief {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut raw: Vec<(usize, f64)> = entries.into_iter().collect();
        if raw
            .iter()
            .any(|&(x, w)| x >= dim || !(w >= 0.0) || !w.is_finite())
        {
            return Err(Error::InvalidArgument(
                "feature belief entry out of range".into(),
            ));
        }
        merge_sorted(&mut raw);
        raw.retain(|e| e.1 > 0.0);
        let total: f64 = raw.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > BELIEF_SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "feature belief sums to {total}, expected 1"
            )));
        }
        Ok(Self { dim, entries: raw })
    }

    pub fn from_dense(weights: &[f64]) -> Result<Self> {
        Self::new(weights.len(), weights.iter().copied().enumerate())
    }

    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, x: usize) -> f64 {
        match self.entries.binary_search_by_key(&x, |e| e.0) {
            Ok(p) => self.entries[p].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(x, w) in &self.entries {
            out[x] = w;
        }
        out
    }

    /// `max_x |q(x) - delta_x / rho|`.
    pub fn max_norm_distance(&self, g: &GridIndex) -> f64 {
        let rho = g.resolution() as f64;
        let mut worst = 0.0f64;
        let (mut a, mut b) = (0, 0);
        let (qa, gb) = (&self.entries, g.entries());
        while a < qa.len() || b < gb.len() {
            let fa = qa.get(a).map(|e| e.0).unwrap_or(usize::MAX);
            let fb = gb.get(b).map(|e| e.0 as usize).unwrap_or(usize::MAX);
            let d = if fa == fb {
                let d = (qa[a].1 - gb[b].1 as f64 / rho).abs();
                a += 1;
                b += 1;
                d
            } else if fa < fb {
                a += 1;
                qa[a - 1].1
            } else {
                b += 1;
                gb[b - 1].1 as f64 / rho
            };
            worst = worst.max(d);
        }
        worst
    }
}

/// Representative feature belief `delta / rho` on the uniform simplex grid,
/// keyed by its integer vector `delta` (only nonzero entries stored).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    resolution: u32,
    deltas: Vec<(u32, u32)>,
}

impl GridIndex {
    /// From a dense `delta` vector; its entries must sum to `resolution`.
    pub fn new(resolution: u32, dense: &[u32]) -> Result<Self> {
        let deltas = dense
            .iter()
            .enumerate()
            .filter(|e| *e.1 > 0)
            .map(|(x, &d)| (x as u32, d))
            .collect();
        Self::from_sparse(resolution, deltas)
    }

    pub fn from_sparse(resolution: u32, mut deltas: Vec<(u32, u32)>) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument(
                "grid resolution must be positive".into(),
            ));
        }
        deltas.retain(|e| e.1 > 0);
        deltas.sort_unstable();
        if deltas.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(
                "repeated feature in grid index".into(),
            ));
        }
        let total: u64 = deltas.iter().map(|e| e.1 as u64).sum();
        if total != resolution as u64 {
            return Err(Error::InvalidArgument(format!(
                "grid index entries sum to {total}, expected {resolution}"
            )));
        }
        Ok(Self { resolution, deltas })
    }

    pub(crate) fn from_sorted_unchecked(resolution: u32, deltas: Vec<(u32, u32)>) -> Self {
        debug_assert_eq!(deltas.iter().map(|e| e.1).sum::<u32>(), resolution);
        Self { resolution, deltas }
    }

    /// All mass on one feature.
    pub fn unit(resolution: u32, feature: usize) -> Self {
        Self {
            resolution,
            deltas: vec![(feature as u32, resolution)],
        }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Nonzero `(feature, delta)` pairs sorted by feature.
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.deltas
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.deltas.last().map(|e| e.0 as usize)
    }

    pub fn to_dense(&self, k: usize) -> Vec<u32> {
        let mut out = vec![0; k];
        for &(x, d) in &self.deltas {
            out[x as usize] = d;
        }
        out
    }

    pub fn feature_belief(&self, k: usize) -> FeatureBelief {
        let rho = self.resolution as f64;
        FeatureBelief::from_sorted_unchecked(
            k,
            self.deltas
                .iter()
                .map(|&(x, d)| (x as usize, d as f64 / rho))
                .collect(),
        )
    }

    pub fn is_valid_for(&self, k: usize, resolution: u32) -> bool {
        self.resolution == resolution && self.max_feature().is_none_or(|x| x < k)
    }
}

/// `C(rho + k - 1, k - 1)`, the number of grid points at resolution `rho`
/// over `k` features.
pub fn grid_size(rho: u32, k: usize) -> Result<u64> {
    if k == 0 {
        return Err(Error::InvalidArgument("grid over zero features".into()));
    }
    let n = rho as u128 + k as u128 - 1;
    let r = (k as u128 - 1).min(rho as u128);
    let mut acc: u128 = 1;
    for i in 1..=r {
        // acc * (n - r + i) is divisible by i at every step
        acc = acc
            .checked_mul(n - r + i)
            .ok_or(Error::GridOverflow { rho, k })?
            / i;
        if acc > u64::MAX as u128 {
            return Err(Error::GridOverflow { rho, k });
        }
    }
    Ok(acc as u64)
}

/// Every grid point at resolution `rho` over `k` features, in lexicographic
/// order of their dense vectors.
pub fn enumerate_grid(rho: u32, k: usize) -> Result<Vec<GridIndex>> {
    let size = grid_size(rho, k)?;
    let mut out = Vec::with_capacity(usize::try_from(size).unwrap_or(0));
    let mut current: Vec<(u32, u32)> = Vec::with_capacity(k);
    fn rec(
        x: usize,
        k: usize,
        left: u32,
        rho: u32,
        cur: &mut Vec<(u32, u32)>,
        out: &mut Vec<GridIndex>,
    ) {
        if x + 1 == k {
            if left > 0 {
                cur.push((x as u32, left));
            }
            out.push(GridIndex::from_sorted_unchecked(rho, cur.clone()));
            if left > 0 {
                cur.pop();
            }
            return;
        }
        for d in 0..=left {
            if d > 0 {
                cur.push((x as u32, d));
            }
            rec(x + 1, k, left - d, rho, cur, out);
            if d > 0 {
                cur.pop();
            }
        }
    }
    rec(0, k, rho, rho, &mut current, &mut out);
    Ok(out)
}

/// The set of representative feature beliefs together with its belief
/// aggregation rule. Small grids may be enumerated explicitly; large ones are
/// implicit and members are created on demand from their integer keys.
#[derive(Debug, Clone)]
pub struct RepresentativeSet {
    k: usize,
    rho: u32,
    psi: PsiMode,
    members: Option<Vec<GridIndex>>,
}

impl RepresentativeSet {
    pub fn explicit(k: usize, rho: u32, psi: PsiMode) -> Result<Self> {
        Ok(Self {
            k,
            rho,
            psi,
            members: Some(enumerate_grid(rho, k)?),
        })
    }

    pub fn implicit(k: usize, rho: u32, psi: PsiMode) -> Self {
        Self {
            k,
            rho,
            psi,
            members: None,
        }
    }

    pub fn num_features(&self) -> usize {
        self.k
    }

    pub fn resolution(&self) -> u32 {
        self.rho
    }

    pub fn psi_mode(&self) -> PsiMode {
        self.psi
    }

    pub fn members(&self) -> Option<&[GridIndex]> {
        self.members.as_deref()
    }

    pub fn contains(&self, g: &GridIndex) -> bool {
        g.is_valid_for(self.k, self.rho)
    }

    /// Belief aggregation probabilities `psi_{q, q~}` for a feature belief.
    pub fn weights(&self, q: &FeatureBelief) -> Vec<(GridIndex, f64)> {
        self.psi.weights(q, self.rho)
    }
}
