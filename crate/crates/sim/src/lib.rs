//! Simulation runner, configuration, result files and command-line plumbing
//! around `bre-core`.

pub mod config;
pub mod output;
pub mod report;
pub mod runner;

/// Process exit codes of the `bre-sim` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const OUTPUT: i32 = 4;
}
