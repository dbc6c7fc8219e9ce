//! Hypergraph-based social recommendation with centrality-augmented random
//! walk features, attention message passing and consensus dynamics.

pub mod benchfns;
pub mod centrality;
pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod ids;
pub mod model;
pub mod oracles;
pub mod pipeline;
pub mod preprocess;
pub mod propagation;
pub mod recommender;
pub mod rng;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
pub use ids::IdMap;
