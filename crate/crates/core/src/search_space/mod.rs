//! The searchable space: multi-resolution grid topology, genome encoding,
//! constraint validation, the prior-biased sampler and IR decoding.

mod config;
mod edits;
mod encoding;
mod genome;
mod ir;
mod sampler;
mod validate;

use thiserror::Error;

pub use config::{SearchSpaceConfig, HEADS, NUM_ROWS, STRIDE_ROWS};
pub use edits::{neighbors, single_edits};
pub use encoding::{
    decode, encode, encode_with, encoding_key, gene_distance, gene_values, genome_from_values,
    n_var, Gene, GeneLayout, Segment,
};
pub use genome::{CellGene, Edge, Genome, NodeGene, Operator, Topology};
pub use ir::{decode_to_ir, ArchitectureIR, HeadSpec, IrEdge, OpInstance, OpKind, Stage};
pub use sampler::{enumerate_genomes, legal_values, repair, sample, sample_with, BranchFilter};
pub use validate::{validate, Violation};

#[derive(Debug, Error)]
pub enum SearchSpaceError {
    #[error("invalid search-space config: {0}")]
    InvalidConfig(String),
    #[error("genome does not match the config: {0}")]
    StructureMismatch(String),
    #[error("malformed encoding: {0}")]
    MalformedEncoding(String),
    #[error("genome violates constraints: {0:?}")]
    ConstraintViolation(Vec<Violation>),
    #[error("no single edit keeps the genome valid")]
    NoLegalNeighbor,
    #[error("space has more than {limit} genomes")]
    TooLarge { limit: usize },
}
