//! Duality-gap evaluation for two-player zero-sum games and GANs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod game;
pub mod io;
pub mod metric;
pub mod net;
pub mod optim;
pub mod oracle;
pub mod quality;
pub mod rng;
pub mod train;

pub use error::{Error, FormatError, Result};
