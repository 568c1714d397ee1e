//! Experiment harness behind the `palace` binary: synthetic data generation,
//! the domain-inflation study, CV runs, selector sweeps, audits, and
//! certificate reports, with reproducibility manifests on every output.

pub mod config;
pub mod experiment;
pub mod report;
pub mod synth;
