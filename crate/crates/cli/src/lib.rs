//! Batch front end for `affobs-core`: scenario configs in, CSV traces and
//! run reports out.

// `!(x > 0.0)` is used on purpose so that NaN fails the check; index loops
// mirror the matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod app;
pub mod config;
pub mod report;
pub mod run;
pub mod trace;
