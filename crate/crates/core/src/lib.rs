//! Academic document retrieval: a trainable dense retriever, a joint
//! query–passage reranker, and citation-based reference expansion, with the
//! contrastive training and top-k evaluation that go with them.

pub mod corpus;
pub mod dense;
pub mod error;
pub mod eval;
pub mod extract;
pub mod pipeline;
pub mod prompts;
pub mod querygen;
pub mod ranking;
pub mod reranker;
pub mod service;
pub mod sparse;
pub mod store;
pub mod synthetic;
pub mod text;
pub mod train;

pub use error::{Error, Result};
