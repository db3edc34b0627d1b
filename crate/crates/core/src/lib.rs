pub mod corpus;
pub mod annotation;
pub mod design;
pub mod features;
pub mod regression;
pub mod scoring;
pub mod stats;
