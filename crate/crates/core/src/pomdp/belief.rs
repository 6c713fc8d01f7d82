use rand::Rng;

use crate::error::{Error, Result};

/// Weights below this fraction of the total mass are dropped after a Bayes
/// update, and the remainder is renormalized.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Tolerance on `sum(b) == 1` for externally supplied beliefs.
pub const BELIEF_SUM_TOLERANCE: f64 = 1e-10;

/// Probability distribution over the unobservable states of a model.
///
/// Stored sparsely as `(state, weight)` pairs sorted by state; absent states
/// carry exactly zero weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl Belief {
    /// Builds a belief from possibly unsorted, possibly repeated entries.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut raw: Vec<(usize, f64)> = entries.into_iter().collect();
        for &(i, w) in &raw {
            if i >= dim {
                return Err(Error::InvalidArgument(format!(
                    "belief entry for state {i} out of range (n = {dim})"
                )));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "belief weight {w} for state {i} is not a probability"
                )));
            }
        }
        merge_sorted(&mut raw);
        raw.retain(|&(_, w)| w > 0.0);
        let total: f64 = raw.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > BELIEF_SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "belief weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { dim, entries: raw })
    }

    pub fn from_dense(weights: &[f64]) -> Result<Self> {
        Self::new(weights.len(), weights.iter().copied().enumerate())
    }

    /// Point mass on state `i`.
    pub fn point(dim: usize, i: usize) -> Self {
        assert!(i < dim, "state {i} out of range (n = {dim})");
        Self {
            dim,
            entries: vec![(i, 1.0)],
        }
    }

    /// Uniform distribution over the given states.
    pub fn uniform(dim: usize, states: &[usize]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument(
                "uniform belief over no states".into(),
            ));
        }
        let w = 1.0 / states.len() as f64;
        Self::new(dim, states.iter().map(|&i| (i, w)))
    }

    /// Normalizes nonnegative unnormalized mass, pruning negligible entries.
    /// Returns `None` when the total mass is zero.
    pub(crate) fn from_mass(dim: usize, mut raw: Vec<(usize, f64)>) -> Option<Self> {
        merge_sorted(&mut raw);
        let total: f64 = raw.iter().map(|e| e.1).sum();
        if !(total > 0.0) {
            return None;
        }
        let cut = PRUNE_THRESHOLD * total;
        raw.retain(|&(_, w)| w > cut);
        let kept: f64 = raw.iter().map(|e| e.1).sum();
        for e in raw.iter_mut() {
            e.1 /= kept;
        }
        Some(Self { dim, entries: raw })
    }

    /// Builds from entries already known to be sorted, unique and normalized.
    pub(crate) fn from_sorted_unchecked(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.entries.binary_search_by_key(&i, |e| e.0) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .entries
            .iter()
            .map(|&(_, w)| if w > 0.0 { w * w.ln() } else { 0.0 })
            .sum::<f64>()
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        let mut acc = 0.0;
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, x)), Some(&&(j, y))) => {
                    if i == j {
                        acc += (x - y).abs();
                        a.next();
                        b.next();
                    } else if i < j {
                        acc += x;
                        a.next();
                    } else {
                        acc += y;
                        b.next();
                    }
                }
                (Some(&&(_, x)), None) => {
                    acc += x;
                    a.next();
                }
                (None, Some(&&(_, y))) => {
                    acc += y;
                    b.next();
                }
                (None, None) => break,
            }
        }
        acc
    }

    /// `gamma * self + (1 - gamma) * other`.
    pub fn mix(&self, other: &Belief, gamma: f64) -> Result<Belief> {
        if self.dim != other.dim {
            return Err(Error::InvalidArgument("belief dimensions differ".into()));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "mixing weight {gamma} outside [0, 1]"
            )));
        }
        let mut raw: Vec<(usize, f64)> = self
            .entries
            .iter()
            .map(|&(i, w)| (i, gamma * w))
            .chain(other.entries.iter().map(|&(i, w)| (i, (1.0 - gamma) * w)))
            .collect();
        merge_sorted(&mut raw);
        raw.retain(|&(_, w)| w > 0.0);
        Ok(Self {
            dim: self.dim,
            entries: raw,
        })
    }

    /// Draws a state index from the belief.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_weighted(&self.entries, |e| e.1, rng).0
    }
}

/// Samples from a slice of weighted items whose weights sum to (roughly) one.
pub(crate) fn sample_weighted<'a, T, R: Rng + ?Sized>(
    items: &'a [T],
    weight: impl Fn(&T) -> f64,
    rng: &mut R,
) -> &'a T {
    let total: f64 = items.iter().map(&weight).sum();
    let mut u = rng.random::<f64>() * total;
    for item in items {
        let w = weight(item);
        if u < w {
            return item;
        }
        u -= w;
    }
    // rounding left a sliver of mass past the last positive item
    items
        .iter()
        .rev()
        .find(|it| weight(it) > 0.0)
        .unwrap_or_else(|| items.last().expect("sampling from an empty set"))
}

/// Sorts by index and sums weights of repeated indices.
pub(crate) fn merge_sorted(raw: &mut Vec<(usize, f64)>) {
    raw.sort_unstable_by_key(|e| e.0);
    let mut out = 0;
    for k in 0..raw.len() {
        if out > 0 && raw[out - 1].0 == raw[k].0 {
            raw[out - 1].1 += raw[k].1;
        } else {
            raw[out] = raw[k];
            out += 1;
        }
    }
    raw.truncate(out);
}
