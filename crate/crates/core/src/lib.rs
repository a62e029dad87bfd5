//! Unregularized convex-risk minimization for binary linear classification
//! over finite hypothesis classes.
//!
//! The crate covers surrogate losses and their ψ-transforms, empirical risks,
//! a dense simplex solver, exact hard-core decompositions with primal and dual
//! certificates, boosting-style optimizers with duality-gap certificates,
//! finite-sample bound calculators, and synthetic experiment drivers.

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod hardcore;
pub mod hypotheses;
pub mod losses;
pub mod lp;
pub mod numeric;
pub mod optimize;
pub mod risk;

pub use error::{Error, Result};
pub use hardcore::{compute_hardcore, HardCoreCertificate};
pub use hypotheses::{FeatureMatrix, HypothesisClass};
pub use losses::Loss;
pub use optimize::{OptRun, OptimizerConfig, Weighting};
pub use risk::{RegionMask, Sample};
