//! Synthesis and verification toolbox for linear parameter-varying (LPV)
//! systems with time-varying state delays.
//!
//! The pipeline:
//!
//! 1. Describe a delayed LPV plant ([`model::DelayedLpvPlant`]) over a
//!    parameter box with bounded rates ([`param::ParameterDomain`]).
//! 2. Characterize the delay-difference operator with dynamic IQC
//!    multipliers and their J-spectral factor filters ([`iqc`]).
//! 3. Solve the parameter-dependent LMI synthesis problem on a grid,
//!    minimizing the closed-loop L2 gain, and recover a delay-dependent
//!    state-feedback gain schedule ([`synth`]).
//! 4. Cross-check the recovered gains against the analysis LMI and
//!    validate the closed loop in delay-differential simulation ([`sim`]).
//!
//! LMI feasibility problems are lowered to semidefinite programs through
//! the solver-agnostic interface in [`sdp`].

// Link the system BLAS/LAPACK used by the SDP solver.
extern crate openblas_src;

pub mod error;
pub mod iqc;
mod linmat;
pub mod model;
pub mod param;
pub mod sdp;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
