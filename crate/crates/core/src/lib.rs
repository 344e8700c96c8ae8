//! Age-of-Information minimal task scheduling for mobile edge computing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aoi;
pub mod baselines;
pub mod bridge;
pub mod fql;
pub mod harness;
pub mod mdp;
pub mod sim;
