//! File formats, the `rmdp-lab` command line and experiment plumbing for
//! [`rmdp_core`].

pub mod cli;
pub mod error;
pub mod format;
pub mod manifest;
pub mod parallel;
