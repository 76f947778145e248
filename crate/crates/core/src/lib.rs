//! Fully dynamic maximal matching with sublinear amortized work per update.

pub mod analysis;
pub mod edcs;
pub mod engine;
pub mod estree;
pub mod graph;
pub mod harness;
pub mod lpm;
pub mod staticmatch;
