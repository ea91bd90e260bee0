//! Spectral analysis and time-domain simulation of PT-symmetric oscillator
//! pairs: one lossy, one with gain, coupled with strength `ε`.
//!
//! * [`spectral`]: closed-form eigenvalues of the 2×2 source/sink
//!   Hamiltonian and of the 4×4 linear gain/loss system, with independent
//!   root-finding oracles and phase classification.
//! * [`dynamics`]: RK4 integration of the lossless, linear gain/loss and
//!   event-driven energy-transfer models, plus envelope and Rabi analysis.
//! * [`tof`]: the classical time-of-flight integral for `x²(ix)^ε`.
//! * [`sweep`]: parallel phase-diagram sweeps and boundary refinement.
//! * [`io`]: CSV formats for trajectories, transfer logs and phase maps.

// `!(x > 0.0)` is the idiom for rejecting NaN along with the bound;
// `is_multiple_of` postdates the minimum supported compiler
#![allow(clippy::neg_cmp_op_on_partial_ord, unknown_lints, clippy::manual_is_multiple_of)]

pub mod dynamics;
pub mod error;
pub mod format;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod spectral;
pub mod sweep;
pub mod tof;

pub use dynamics::{integrate, Model, SimConfig, Simulation};
pub use error::{Error, Result, ValidationError};
pub use model::{
    validate_params, Channel, CoupledParams, PhaseLabel, RawCoupledParams, StateVector,
    TimeSeries, TransferEvent, TransferLog, TwoBoxParams,
};
pub use spectral::{ModalSpectrum, QuarticCoefficients, Tolerances, TwoBoxSpectrum};
pub use sweep::{AxisRange, BoundaryPoint, GridMode, GridSpec, PhaseMap};
pub use tof::{TofRequest, TofResult};

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
