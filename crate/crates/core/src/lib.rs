//! Flat precoding for multi-user MIMO downlink with per-antenna power bounds.

pub mod channel;
pub mod constraints;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod power;
pub mod precoder;
pub mod wmmse;
pub mod zf;

pub use error::{FlatPrecError, Result};
