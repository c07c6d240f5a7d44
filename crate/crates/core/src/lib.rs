//! Human-guided exploration of real-valued tables.
//!
//! Background knowledge and exploration goals are written as tiles: row ×
//! column blocks whose cells are shuffled together by a shared row
//! permutation. Two tilings (the analyst's knowledge plus each side of a
//! hypothesis) induce two permutation distributions over data sets, and the
//! engine finds the linear projection in which their variances differ most.

pub mod covariance;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod hypothesis;
pub mod projection;
pub mod sampler;
pub mod selection;
pub mod session;
pub mod tiling;

pub use covariance::{analytical_covariance, montecarlo_covariance, CovMatrix};
pub use dataset::{load_csv, CenteredData, ConstantColumnPolicy, Dataset, LoadOptions};
pub use error::{Error, Result};
pub use hypothesis::{assemble, HypothesisPair, HypothesisSpec};
pub use projection::{gain, optimal_directions, project, whiten, Directions, ViewResult};
pub use sampler::{apply, sample_permutation, SeededRng};
pub use selection::{suggest_attributes, AttributeSuggestion};
pub use session::{Session, SessionSnapshot, Which};
pub use tiling::{equivalent_bruteforce, PermutationVector, Tile, Tiling};
