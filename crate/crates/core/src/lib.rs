//! Semantic search for Jupyter notebook repositories.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`notebook`] discovers `.ipynb` files and parses them into typed cells.
//! 2. [`preprocess`] normalizes markdown prose and code cells.
//! 3. [`chunker`] turns cells into embeddable chunks that fit the embedding
//!    model's token budget, splitting oversized code cells into top-level
//!    classes and functions and summarizing units that still do not fit.
//! 4. [`gateway`] embeds chunks (remote provider or deterministic offline
//!    hashing), [`store`] keeps them in an exact cosine-distance index, and
//!    [`query`] answers exact, user-defined, and code-summary queries.
//!
//! [`app`] wires everything into index / sync / query / eval commands.

pub mod app;
pub mod chunker;
pub mod gateway;
pub mod hash;
pub mod notebook;
pub mod preprocess;
pub mod query;
pub mod store;

pub use chunker::{Chunk, ChunkKind, CodeUnit, TokenBudget};
pub use gateway::{EmbeddingVector, ModelConfig, ModelGateway};
pub use notebook::{Cell, CellKind, NotebookDocument};
pub use query::{EvalReport, Query, QueryType};
pub use store::{ObjectKey, SearchFilter, SearchHit, StoredObject, VectorStore};
