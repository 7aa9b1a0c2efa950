//! Command-line front end for the adacomp library: scenario files, policy
//! runs, comparisons and pinned reproduction targets.

pub mod config;
pub mod error;
pub mod report;
pub mod repro;
pub mod run;
