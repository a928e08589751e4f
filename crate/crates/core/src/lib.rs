//! Classical and phase-enhanced quantum memory costs of stationary stochastic
//! processes.
//!
//! The crate is organised bottom-up:
//!
//! - [`process`]: unifilar processes, stationary distributions, word
//!   statistics, causal-state merging and the classical costs `C_μ`, `D_μ`.
//! - [`gram`]: phase assignments, memory-state overlaps (closed form for
//!   Markov processes, fixed-point iteration in general, brute-force word
//!   enumeration as an oracle) and the entropic/dimensional quantum costs.
//! - [`circuit`]: explicit memory states and a unitary realising the
//!   phase-enhanced model, with exact and sampled output statistics.
//! - [`advantage`]: dimensional certificates for three-state Markov
//!   processes, phase optimisation of the entropic cost and detection of
//!   competing optima.
//! - [`sweep`]: parameter sweeps over three-state Markov processes.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the double-precision types used by the sweeps and the CLI.

pub mod advantage;
pub mod circuit;
pub mod error;
pub mod gram;
pub mod models;
pub mod process;
pub mod scalar;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::Real;

/// Output schema version stamped on every JSON and CSV artifact.
pub const SCHEMA_VERSION: u32 = 1;

pub type Process = process::StochasticProcess<f64>;
pub type Phases = gram::PhaseAssignment<f64>;
pub type Overlaps = gram::OverlapMatrix<f64>;
pub type Spectrum = gram::MemorySpectrum<f64>;
pub type Unitary = circuit::UnitaryModel<f64>;
pub type Certificate = advantage::DimensionalCertificate<f64>;

pub type Process32 = process::StochasticProcess<f32>;
pub type Phases32 = gram::PhaseAssignment<f32>;
pub type Overlaps32 = gram::OverlapMatrix<f32>;
pub type Spectrum32 = gram::MemorySpectrum<f32>;
