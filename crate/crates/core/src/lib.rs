//! Gaussian-process digital twin of a damped single-degree-of-freedom system.
//!
//! The crate simulates a physical twin whose stiffness and mass drift over a
//! slow service time ([`dynamics`]). It turns measured frequencies back into
//! fractional property changes ([`inversion`]) and fits GP emulators that track
//! and forecast those changes ([`emulator`]). It also chooses the emulator's
//! mean and kernel by BIC ([`selection`]).
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common double-precision instantiations.

pub mod dynamics;
pub mod emulator;
pub mod error;
pub mod inversion;
pub mod scalar;
pub mod selection;

pub use error::{Result, TwinError};
pub use scalar::Scalar;

pub type NominalSystem = dynamics::NominalSystem<f64>;
pub type EvolutionProfile = dynamics::EvolutionProfile<f64>;
pub type MeasurementSeries = dynamics::MeasurementSeries<f64>;
pub type DeltaEstimateSeries = inversion::DeltaEstimateSeries<f64>;
pub type Kernel = emulator::Kernel<f64>;
pub type MeanBasis = emulator::MeanBasis<f64>;
pub type Matrix = emulator::Matrix<f64>;
pub type TrainedEmulator = emulator::TrainedEmulator<f64>;
pub type Prediction = emulator::Prediction<f64>;
pub type Selection = selection::Selection<f64>;

/// Single-precision emulator, for memory-bound deployments.
pub type TrainedEmulatorF32 = emulator::TrainedEmulator<f32>;
