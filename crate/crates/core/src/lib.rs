//! Kernel interpolation with classical, variably scaled, mapped and mapped
//! variably scaled kernels, plus a visibility-based imaging pipeline.

pub mod cli;
pub mod error;
pub mod harness;
pub mod imaging;
pub mod interpolation;
pub mod io;
pub mod kernels;
pub(crate) mod linalg;
pub mod metrics;
pub mod model_selection;
pub mod scalings;

pub use error::{Error, Result};
pub use interpolation::{assemble_gram, fit, fit_with, power_function, FitOptions, Interpolant, NodeSet};
pub use kernels::{Profile, RadialKernel};
pub use linalg::{condition_estimate, CONDITION_LIMIT};
pub use scalings::{mvsk_eval, AugmentedMap, NodeMap, Partition, ScalingFunction};
