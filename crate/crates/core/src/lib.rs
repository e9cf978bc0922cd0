//! Constraint-hierarchy document ranking and layered criteria pipelines.

pub mod config;
pub mod corpus;
pub mod eval;
pub mod explain;
pub mod hierarchy;
pub mod output;
pub mod pipeline;
pub mod providers;
pub mod ranking;
