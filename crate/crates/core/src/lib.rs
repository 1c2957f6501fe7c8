//! State-vector simulation of two tripartite-entanglement protocols:
//! secret sharing by entanglement swapping of two GHZ triples, and secure
//! dense coding over a W state, together with their attack models and a
//! seeded Monte Carlo harness.

pub mod adversary;
pub mod bellmeas;
pub mod canon;
pub mod cli;
pub mod error;
pub mod harness;
pub mod qss;
pub mod qstate;
pub mod sdc;

pub use error::{QError, Result};
