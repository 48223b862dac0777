#![cfg_attr(not(test), no_std)]
// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod apps;
pub mod control;
pub mod dynamics;
pub mod geometry;
pub mod model;
pub mod sim;
pub mod strategies;
pub mod wrenchset;
