//! Core data model: ratings, trust edges, simple graphs, hypergraphs and
//! feature matrices.
//!
//! Every type is immutable once built; builders return fresh values.

mod features;
mod graph;
mod hypergraph;
mod social;
mod store;

pub use features::FeatureMatrix;
pub use graph::SimpleGraph;
pub use hypergraph::{
    build_co_interaction, build_co_preference, CoPreference, Hyperedge, HyperedgeKind,
    Hypergraph, HypergraphStats, TimeWindow,
};
pub use social::{load_social, SocialEdge, SocialGraph};
pub use store::{
    load_interactions, parse_ratings, DedupRule, Interaction, InteractionStore, RawRating,
    MAX_RATING, MIN_RATING,
};
