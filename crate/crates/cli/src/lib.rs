//! Command-line front end and annotation service for `bwskit`.

pub mod cli;
pub mod service;
pub mod store;
