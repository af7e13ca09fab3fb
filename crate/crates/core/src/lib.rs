//! Kerr nonlinearity of Rydberg excitons in Cu₂O.
//!
//! The crate has two halves. The forward model ([`rdma`], [`blockade`])
//! evaluates the linear and third-order susceptibilities of the yellow P
//! exciton series and the resulting intensity-dependent phase shift. The
//! inverse pipeline ([`interferometry`], [`fitting`]) recovers that phase
//! shift from off-axis interferograms and fits n₂, saturation intensities
//! and their scaling with the principal quantum number.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockade;
pub mod config;
pub mod error;
pub mod fitting;
pub mod interferometry;
pub mod rdma;
pub mod scalar;
pub mod seeding;
pub mod units;

pub use blockade::{BlockadeKind, SaturationTarget};
pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type Config = config::ExcitonSeriesConfig<f64>;
pub type ConfigFile = config::ConfigFile<f64>;
pub type Grid = config::SpectralGrid<f64>;
pub type Blockade = blockade::BlockadeMode<f64>;
pub type Spectrum = rdma::SusceptibilitySpectrum<f64>;
pub type Kerr = rdma::KerrResponse<f64>;
pub type FieldMap = interferometry::ScalarFieldMap<f64>;
pub type ComplexMap = interferometry::ComplexFieldMap<f64>;
pub type Curve = interferometry::PhaseShiftCurve<f64>;
pub type Fit = fitting::FitResult<f64>;
