//! Which-path information in a two-pulse Ramsey sequence driving a
//! two-level emitter.
//!
//! The crate is organised bottom-up:
//!
//! * [`state`] exact eight-amplitude joint state of the emitter and two
//!   emission time bins, with the pulse and decay primitives;
//! * [`analytics`] closed-form Ramsey observables, cross-checked against
//!   explicit state evolution;
//! * [`field`] time-resolved emitted amplitude, intensity, Mach-Zehnder
//!   counts and self-homodyne visibility;
//! * [`decoherence`] spectral-diffusion and nuclear-field (Overhauser)
//!   ensemble averages, closed form and Monte Carlo;
//! * [`oracle`] a brute-force collision model used as an independent check;
//! * [`sweep`] parameter sweeps, figure presets and table output used by the
//!   `whichpath` binary.

pub mod analytics;
pub mod decoherence;
pub mod error;
pub mod field;
pub mod oracle;
pub mod rng;
pub mod roots;
pub mod state;
pub mod sweep;

pub use analytics::{RamseyConfig, WhichPathReport};
pub use error::{Error, Result};
pub use state::{DecaySpec, JointState, PulseSpec, TimeBin};

/// Tolerance on algebraic identities evaluated in double precision.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// Tolerance used when validating inputs (e.g. state normalization).
pub const INPUT_TOL: f64 = 1e-9;

/// Probability weight below which an atomic branch counts as empty.
pub const ZERO_WEIGHT: f64 = 1e-20;

/// Radiative lifetime `1/γ` of the reference emitter, in picoseconds.
pub const GAMMA_INVERSE_PS: f64 = 202.4;

/// Repetition period quoted alongside the main measurements, in ns.
pub const TAU_P_MAIN_NS: f64 = 12.3;

/// Repetition period used for the spin-decoherence estimate, in ns.
pub const TAU_P_SPIN_NS: f64 = 12.5;
