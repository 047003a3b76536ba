//! Rate regions and lattice-scheme Monte Carlo for the two-user Gaussian
//! multiple-access channel with interference known, up to an estimation
//! error, at each transmitter.
//!
//! * [`lattice`]: scalar lattices, modulo reduction, dithers.
//! * [`envelope`]: upper convex envelopes for time sharing.
//! * [`rates`]: regime classification, sum rates, regions, MMSE scaling.
//! * [`sim`]: sample-level simulation of the lattice schemes.

pub mod envelope;
pub mod error;
pub mod exec;
pub mod lattice;
pub mod rates;
pub mod sim;
pub mod stats;

pub use envelope::{upper_convex_envelope, EnvelopePoint, GridSpec, Spacing};
pub use error::{Error, Result};
pub use exec::Execution;
pub use lattice::ScalarLattice;
pub use rates::{ChannelParams, Regime, SchemeKind};
