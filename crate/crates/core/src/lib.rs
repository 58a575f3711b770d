//! Weighted sum rate maximization for the multiuser MIMO downlink with
//! per-antenna power caps.
//!
//! The rate problem is rewritten as a weighted sum MSE problem with auxiliary
//! variables, and the precoders are improved by alternating between
//!
//! * a transfer to a virtual uplink whose diagonal noise covariance is the
//!   fixed point of a power-balancing map ([`duality`]),
//! * an uplink MMSE receiver update and the transfer back to the downlink,
//! * a geometric program over stream powers and the auxiliary variables
//!   ([`gp`]),
//! * a downlink MMSE receiver update.
//!
//! The loop itself lives in [`optimizer`]; [`harness`] drives Monte Carlo
//! sweeps over SNR and writes CSV results.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod duality;
pub mod error;
pub mod gp;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optimizer;

pub use crate::duality::{FixedPointOptions, PowerBudget, UplinkNoise, UplinkTransceiver};
pub use crate::error::{Error, Result};
pub use crate::gp::{GpOptions, GpProblem, GpSolution, GpStatus, Monomial, Posynomial};
pub use crate::linalg::{CMat, C64};
pub use crate::model::{
    AuxVars, ChannelSet, CouplingMatrices, Decomposition, DownlinkTransceiver, NoiseModel,
    RateWeights, SystemDims,
};
pub use crate::optimizer::{
    run_algorithm_ii, IterationRecord, IterationTrace, Solution, SolveOptions,
};
