//! Worst-case redundancy of universal compression for envelope classes.
//!
//! The crate computes Shtarkov sums exactly wherever enumeration is
//! feasible, brackets the redundancy of arbitrary summable envelope classes
//! with sums of bounded-Poisson redundancies, and checks the structural
//! properties of Shtarkov sums (subset, union, product, type reduction,
//! Poissonization) against brute-force oracles on small instances.
//!
//! All internal arithmetic is in natural-log space ([`LogSpace`]); values
//! are converted to bits only when they are reported.
//!
//! With the default `parallel` feature the large inner sums (type
//! enumeration, per-coordinate envelope sums, per-length Poissonized sums,
//! Monte-Carlo trials) run on rayon. Work is always split into the same
//! fixed chunks and reduced in chunk order, so results are bit-identical
//! with and without the feature.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classes;
pub mod cli;
pub mod envelope;
mod error;
pub mod iid_small;
pub mod lemma_checks;
pub mod numerics;
pub mod par;
pub mod poisson_class;
pub mod poissonization;

pub use classes::{
    enumerate_types, ml_prob_type_full_iid, product_class, shtarkov_class_product_power,
    shtarkov_iid_sequences, shtarkov_iid_types, shtarkov_sum_explicit, Budget,
    FiniteClass, FiniteDistribution, RedundancyValue, TypeVector,
};
pub use envelope::{Bracket, Envelope, RedundancyInterval, Tail};
pub use error::{Error, Result};
pub use numerics::{LogSpace, PoissonParam};
pub use poisson_class::BoundedPoissonClass;
