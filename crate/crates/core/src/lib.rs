//! Coded distributed computing: combinatorial Map placement, coded multicast
//! shuffling over GF(2^m), exact communication-load accounting and converse
//! bounds, and a coded distributed sort built on top.

pub mod bounds;
pub mod codec;
pub mod combinatorics;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod gf2m;
pub mod placement;
pub mod rational;
pub mod sortapp;

pub use error::{CdcError, Result};
