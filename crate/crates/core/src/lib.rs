//! Position-dependent snap feedforward for flexible motion systems.
//!
//! The crate is split along the data flow of a learning experiment:
//!
//! * [`plant`] builds a modal model of a free-free beam and freezes it at a
//!   scheduling position into a discrete-time LTI system.
//! * [`trajectory`] plans rest-to-rest fourth-order (snap-limited) references
//!   together with their exact discrete derivative chain.
//! * [`lifted`] treats finite-horizon LTI operators as lower-triangular
//!   Toeplitz matrices and evaluates the feedback loop in that domain.
//! * [`ilc`] learns acceleration/snap feedforward parameters trial-to-trial
//!   with basis functions.
//! * [`gp`] regresses the snap parameter over position with a Gaussian
//!   process.
//!
//! Everything here is `no_std` (with `alloc`); file formats and the command
//! line live in the companion `gpsnap` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod filter;
pub mod gp;
pub mod ilc;
pub mod lifted;
pub mod linalg;
pub mod optim;
pub mod plant;
pub mod trajectory;

pub use error::{Error, Result};
pub use filter::DiscreteTf;
pub use gp::{GpModel, Hyperparameters, MultiStart, Posterior, TrainingSet};
pub use ilc::{BasisMatrix, BasisSet, IlcGains, IlcSession, IlcWeights, TrialRecord, Weighting};
pub use lifted::{ClosedLoop, Controller, LiftedLti};
pub use plant::{BeamConfig, FlexMode, FrozenPlant, ModalPlant, SchedulingPosition};
pub use trajectory::{MotionBounds, Trajectory};
