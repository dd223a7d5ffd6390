//! Command implementations behind the `nearild` binary.

pub mod commands;
pub mod manifest;
pub mod wav;
