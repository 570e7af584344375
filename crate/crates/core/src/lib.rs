//! Norm estimates in free Banach lattices generated by finite-dimensional spaces.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsl;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod estimate;
pub mod expr;
pub(crate) mod family;
pub mod optimize;
pub mod space;
pub mod summing;
pub mod body;
pub mod linear_map;
pub mod lattice;
pub mod lp;
pub mod experiments;
pub mod extension;
pub mod fixtures;
