#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod evolve;
pub mod experiments;
pub mod gme;
pub mod metrology;
pub mod models;
pub mod parallel;
pub mod qmat;
