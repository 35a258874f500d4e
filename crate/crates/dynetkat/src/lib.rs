//! Verification toolkit for dynamic network programs: a dup-free NetKAT core
//! extended with communication, recursion, and multi-packet configurations,
//! plus equivalence checking, safety properties, and reachability analyses.

pub mod analysis;
pub mod dnk;
pub mod equiv;
pub mod error;
pub mod fattree;
pub mod netkat;
pub mod norm;
pub mod packet;
pub mod safety;
pub mod sos;
pub mod syntax;

pub use error::{Error, Result};
