pub mod dataset;
pub mod findings;
pub mod interface;
pub mod maintainability;
pub mod performance;
pub mod pysource;
pub mod reliability;
pub mod reward;
pub mod runner;
pub mod scoring;
pub mod security;
