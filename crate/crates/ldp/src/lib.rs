//! Command-line front end, file formats and parallel Monte Carlo for the
//! `ldp-core` toolkit.

pub mod cli;
pub mod experiment;
pub mod io;
pub mod parallel;
pub mod report;
