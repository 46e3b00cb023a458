//! Spectral testing for long-range dependence in functional time series on
//! the sphere, observed at random locations with additive noise.
//!
//! The pipeline: [`simulate`] coefficient series, [`observe`] them at random
//! points, [`reconstruct`] the curves by series least squares, estimate
//! spectra with [`spectra`], and test with [`lrdtest`]. [`harness`] runs the
//! Monte Carlo size, power and consistency studies.

pub mod error;
pub mod harmonics;
pub mod harness;
pub mod lrdtest;
pub mod observe;
pub mod par;
pub mod reconstruct;
pub mod seed;
pub mod simulate;
pub mod spectra;
pub mod stats;

pub use error::{LrdError, Result};
pub use harmonics::{HarmonicIndex, SieveBasis, SpherePoint};
pub use par::Execution;
pub use harness::{ExperimentConfig, ResultTable, RunOptions, Scenario, SieveRule};
pub use lrdtest::{ProjectionDirection, TestOutcome, TestStatistic};
pub use observe::ObservationSet;
pub use reconstruct::{DesignMatrix, Reconstructor};
pub use simulate::{CoefficientSeries, LrdProfile, SpectralModel};
pub use spectra::{FourierCache, OperatorKernel, WeightKernel};
