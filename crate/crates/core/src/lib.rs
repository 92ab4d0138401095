//! Numerical toolkit for subelliptic evolution operators on Carnot groups.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod cli;
pub mod distance;
pub mod group;
pub mod harnack;
pub mod kernels;
pub mod mean_value;
pub mod operator;
pub mod parametrix;
pub mod poly;
pub mod quadrature;
pub mod special;
