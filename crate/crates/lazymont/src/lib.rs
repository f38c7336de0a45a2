//! Fixed-width modular arithmetic built around a lazy Montgomery reduction
//! pipeline, with an ECM stage-1 factoring engine and a lockstep batch
//! executor on top.
//!
//! The arithmetic keeps residues in relaxed magnitude classes instead of
//! canonicalizing after every operation: Montgomery multiplication of two
//! in-bound residues lands back in bound without a final conditional
//! subtraction, and additions/subtractions reduce branchlessly against a
//! precomputed `2m`. Two optimized REDC variants recover the low part of the
//! `b*m` product from the input instead of multiplying for it.

pub mod batch;
pub mod cli;
pub mod ecm;
mod error;
pub mod limb;
pub mod modred;
pub mod mpnat;
pub mod rng;
pub mod selftest;
pub mod truncmul;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::Error;
pub use limb::{Limb, Word};
pub use mpnat::{FixedNat, MulCounter};
