//! Feature schemes, the disaggregation/aggregation maps, simplex-grid
//! representative feature beliefs and belief aggregation rules.

mod grid;
mod io;
mod psi;
mod scheme;

pub use grid::{enumerate_grid, grid_size, FeatureBelief, GridIndex, RepresentativeSet};
pub use io::SchemeFile;
pub use psi::{convex_weights, nearest_representative, PsiMode};
pub use scheme::{Feature, FeatureScheme, SchemeViolation, SCHEME_TOLERANCE};
