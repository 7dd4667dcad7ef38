//! Service-level dependency resolution and transactional deployment.
//!
//! A deployment request is handled in two phases. The check phase reads
//! repository metadata, builds a dependency tree from the requested unit or
//! service, enumerates every unit selection satisfying the AND/OR/XOR/NOT
//! groups and platform context, and picks one with a selection policy. The
//! execution phase turns that selection into an ordered plan and applies it
//! through per-kind layer managers under a journal, rolling back on failure.

pub mod codec;
pub mod executor;
pub mod hash;
pub mod model;
pub mod repository;
pub mod resolver;
pub mod state;

pub use hash::Sha256Digest;
