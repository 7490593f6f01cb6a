//! Numerical oscillation criteria for damped quasilinear wave equations with
//! deviating arguments, plus simulators that cross-check the verdicts.

pub mod cli;
pub mod criteria;
pub mod expr;
pub mod problem;
pub mod quad;
pub mod reduction;
pub mod sim;
