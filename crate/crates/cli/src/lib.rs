//! Command implementations behind the `hilonet` binary.

pub mod commands;
pub mod manifest;
pub mod plot;
