pub mod config;
pub mod data;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod synth;
