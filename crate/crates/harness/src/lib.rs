//! Command-line harness for phase-bias experiments: corpus I/O, metric
//! reports, augmentation runs, ABX stimulus generation and the listening-test
//! server.

pub mod abx;
pub mod commands;
pub mod corpus;
pub mod disc_dump;
pub mod report;
pub mod server;
pub mod synth;
pub mod wav;
