//! Packet-level simulator of the STrack datacenter transport and a
//! RoCEv2/DCQCN baseline on two-tier fat trees.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the companion `strack-sim` crate.

#![cfg_attr(not(test), no_std)]
// Config checks are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod net;
pub mod rng;
pub mod rocev2;
pub mod sim;
pub mod strack;
pub mod telemetry;
pub mod time;
pub mod workload;

pub use error::{ConfigError, SimError};
pub use time::SimTime;
