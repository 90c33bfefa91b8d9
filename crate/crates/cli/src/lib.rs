//! Command implementations and problem-file handling for the `feq` binary.

pub mod commands;
pub mod problem_file;
