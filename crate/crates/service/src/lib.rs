//! Command-line entry points and the HTTP review service.

pub mod cli;
pub mod commands;
pub mod oracles;
pub mod review;
