//! Exact simulation and optimization of two-twist Ramsey echo protocols on
//! the symmetric (Dicke) subspace of `N` spin-1/2 particles.
//!
//! A protocol prepares the coherent spin state along `x`, twists it about
//! `z` with strength `μ1`, imprints a phase `φ` about `n`, twists about `k`
//! with strength `μ2` and measures `S_m`.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axes;
pub mod bayes;
pub mod catalog;
pub mod de;
pub mod dicke;
pub mod error;
pub mod metrics;
pub mod protocol;
pub mod search;
pub mod symmetry;

pub use axes::{MomentMatrices, Subspace, SvdOptimum};
pub use bayes::{BayesOptions, EmvReport, EstimatorGain, PriorSpec};
pub use catalog::{CatalogBuild, CatalogEntry};
pub use de::DeSettings;
pub use dicke::{SpinOperators, StateVector, UnitVector3};
pub use error::{Error, Result};
pub use metrics::{QfiReport, SensitivityReport};
pub use protocol::{Protocol, ProtocolConfig, SymmetryClass};
pub use search::{LandscapeGrid, PointOptimum, StabilityReport};
pub use symmetry::{FourierClass, FourierReport, GeometryClass};
