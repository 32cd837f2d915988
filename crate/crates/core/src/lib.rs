//! Linear-fractional multitype branching processes on general type spaces.
//!
//! A process is given by a triplet `{K, γ, m}` ([`typespace::LfTriplet`]).
//! [`spectral`] computes the convergence parameter and eigenpair of the mean
//! kernel, [`evolution`] the exact law of generation `n`, [`simulate`] three
//! independent Monte Carlo realizations, and [`stats`] the limit-theorem checks.

pub mod error;
pub mod evolution;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod stats;
pub mod typespace;

pub use error::{Error, Result};
pub use evolution::{evolve, GenerationLaw};
pub use simulate::GenerationSnapshot;
pub use spectral::{analyze, Criticality, Eigenpair, LifeLengthLaw, Recurrence, SpectralSummary};
pub use typespace::{
    ExpFamilyTriplet, FiniteTriplet, ImmigrationMeasure, LfTriplet, SubStochasticKernel, TestFn, Triplet, TripletSpec,
    TypePoint,
};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
