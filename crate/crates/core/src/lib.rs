//! Ordered statistics decoding of binary linear block codes over the
//! binary-input AWGN channel, with a learned per-reception choice of the
//! reprocessing order and a Monte Carlo harness for comparing order policies.

pub mod channel;
pub mod code;
pub mod error;
pub mod gf2;
pub mod ml;
pub mod numfmt;
pub mod osd;
pub mod predictor;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
