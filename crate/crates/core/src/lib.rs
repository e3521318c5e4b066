//! Protocol sequences for topology-transparent medium access: CRT and
//! Reed-Solomon constructions, shift-space verifiers, hexagonal reuse
//! allocation and a slot-level network simulator.

pub mod arith;
pub mod cpc;
pub mod crt;
pub mod error;
pub mod geo;
pub mod netsim;
pub mod seq;
pub mod verify;

pub use error::{Error, Result};
pub use seq::{BinarySequence, SequenceSet, SetMeta};
