//! IO companion to `csipos-core`: bit-exact binary containers for datasets
//! and models, the plain-text run configuration, report emission, and the
//! CLI command implementations.

pub mod commands;
pub mod datastore;
pub mod report;
