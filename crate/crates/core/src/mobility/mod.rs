//! Gravity-model mobility graph over regions.

mod features;
mod graph;

pub use features::aggregate_node_features;
pub use graph::{build_graph, gravity_weight, Edge, GravityConfig, MobilityGraph, Neighbors, Region};
