//! Contracting self-similar groups, their self-similarity complexes, the
//! finiteness properties of cones, shadows and pullbacks under the shift
//! map, and the induced dynamics on the boundary.

pub mod automaton;
pub mod boundary;
pub mod builtins;
pub mod complex;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod verify;
pub mod word;

pub use error::{Error, Result};
pub use word::{Vertex, Word};

/// Truncated sha256 hex digest, used for content and form hashes.
pub fn hash_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
