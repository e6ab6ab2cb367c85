#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod harness;
pub mod initializer;
pub mod integrator;
pub mod macro_solver;
pub mod profile;
pub mod quadrature;
pub mod state;
pub mod tridiag;
