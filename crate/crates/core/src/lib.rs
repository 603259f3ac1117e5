//! Brackets for vector-valued Schatten norms, completely bounded norms and
//! regular norms of maps between matrix algebras.

pub mod block;
pub mod conic;
pub mod cp;
pub mod error;
pub mod extension;
pub mod haagerup;
pub mod io;
pub mod linalg;
pub mod par;
pub mod random;
pub mod regular;
pub mod report;
pub mod rho;
pub mod verify;
pub mod vnorm;

pub use error::{Error, Result};
