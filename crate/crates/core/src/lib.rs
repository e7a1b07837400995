#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Bohmian two-particle double-slit simulation and dense coding /
//! teleportation over signed position channels.

pub mod bohmsim;
pub mod cli;
pub mod densecode;
pub mod error;
pub mod numkit;
pub mod teleport;

pub use error::{EprError, Result};
