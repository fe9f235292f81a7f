//! Command implementations behind the `lqg-privacy` binary, exposed as
//! a library so the integration and acceptance suites can drive them
//! directly.

pub mod commands;
pub mod config;
pub mod output;
