//! Design graph neural network architectures for unseen graphs by retrieving knowledge
//! from benchmark graphs with similar topological properties.

pub mod error;
pub mod graph_data;
pub mod knowledge_base;
pub mod properties;
pub mod search_space;

pub use error::{Error, Result};
pub mod similarity;
pub mod llm;
pub mod evaluator;
pub mod pipeline;
pub mod synthetic;
