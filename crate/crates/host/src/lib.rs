//! Host side of the reference monitor: app bundles, the command line, the
//! line-protocol service and the randomised soundness runner.

pub mod bundle;
pub mod cli;
pub mod service;
pub mod soundness;
