//! Simulation and quantitation for the multiMap MRI sequence.
//!
//! A single multiMap scan acquires 2 x 11 images. [`seqsim`] produces them from a
//! digital phantom; [`pipeline`] runs the four estimation steps (B1, T2,
//! water/fat/off-resonance, T1/M0) over a mask built by [`maskgen`].

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod b1map;
pub mod bloch;
pub mod error;
pub mod fitcore;
pub mod image;
pub mod io;
pub mod maskgen;
pub mod phantom;
pub mod pipeline;
pub mod seqsim;
pub mod t1fit;
pub mod t2fit;
pub mod waterfat;

pub use error::{Error, Result};
