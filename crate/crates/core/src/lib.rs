//! Adaptive landmark embeddings of persistence diagrams.
//!
//! The pipeline: place landmarks on training diagram points by farthest-point
//! sampling ([`cover`]), embed diagrams through per-landmark cap functions
//! ([`embed`]), lift the embedding through an additive per-coordinate Gaussian
//! kernel ([`kernel`]), classify with a soft-margin SVM on the precomputed
//! gram ([`svm`]), rank candidate configurations with closed-form selectors
//! ([`select`]), and attach per-prediction correctness certificates to a
//! nearest-centroid classifier ([`certify`]). Diagrams come from files
//! ([`diagram`]) or from Vietoris-Rips persistence of 2-D point clouds
//! ([`rips`]).

pub mod certify;
pub mod cover;
pub mod diagram;
pub mod embed;
pub mod kernel;
pub mod matching;
pub mod rips;
pub mod select;
pub mod stats;
pub mod svm;

#[doc(hidden)]
pub mod testutil;

#[doc(hidden)]
pub use testutil::{test_rng, TestRng};
