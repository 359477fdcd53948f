//! Library surface of the experiment harness; the `btwave` binary is a
//! thin argument parser over these modules, and the acceptance suite
//! drives them directly.

pub mod config;
pub mod oracle;
pub mod output;
pub mod runs;
