//! Post-processing of pre-trained word embeddings.
//!
//! The crate covers four things: closed-form post-processors (centering, top-p
//! PCA, all-but-the-top), a single-hidden-layer autoencoder whose hidden states
//! serve as post-processed embeddings, numerical checks that the linear
//! autoencoder recovers the PCA subspace, and an evaluation harness (isotropy,
//! word similarity, analogy, concept categorization).

pub mod autoencoder;
pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod isotropy;
pub mod linalg;
pub mod postprocess;
pub mod theory;

pub use error::{Error, Result};
pub use io::EmbeddingSet;
