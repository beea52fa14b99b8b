//! Analytic and formal solutions of a singularly perturbed linear
//! q-difference-differential equation with a logarithmic monodromy term.
//!
//! The pipeline runs bottom-up: [`problem_model`] holds the equation data,
//! [`special_functions`] and [`transforms`] supply the kernels,
//! [`geometry`] certifies the sector constants, [`borel_solver`] computes the
//! Borel-plane fixed point, [`solution_assembly`] maps it back to `(t, z, ε)`,
//! and [`formal_asymptotics`] compares it with the formal series.

pub mod borel_solver;
pub mod cli;
pub mod formal_asymptotics;
pub mod geometry;
pub mod problem_model;
pub mod solution_assembly;
pub mod special_functions;
pub mod transforms;

pub use num_complex::Complex64;
