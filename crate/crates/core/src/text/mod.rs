//! Frozen text bank: chunking, chunk encoding and node-level pooling.

pub mod bank;
pub mod chunk;
pub mod encoder;
pub mod pool;

pub use bank::{build_bank, BankCache, ChunkEmbeddingBank, NodeText};
pub use chunk::{chunk_text, ChunkSpan, ChunkedText};
pub use encoder::{Encoder, EncoderConfig, HashEncoder};
pub use pool::pool_chunks;
