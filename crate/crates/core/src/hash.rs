//! SHA-256 digests and a binary Merkle tree with domain-separated leaves.

use std::fmt;

use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};

/// Identifier of the hash function, pinned in every proof header.
pub const HASH_ID: &str = "sha256";

const LEAF_TAG: u8 = 0x00;
const NODE_TAG: u8 = 0x01;

#[derive(Copy, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 64 {
            return Err(Error::Parse(format!("digest hex has length {}", s.len())));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte =
                u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|e| Error::Parse(format!("digest hex: {e}")))?;
        }
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn hash_bytes(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

pub fn hash_leaf(data: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([LEAF_TAG]);
    h.update(data);
    Digest(h.finalize().into())
}

pub fn hash_node(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([NODE_TAG]);
    h.update(left.0);
    h.update(right.0);
    Digest(h.finalize().into())
}

/// Arity-2 Merkle tree over a power-of-two number of leaf digests.
#[derive(Debug, Clone)]
pub struct MerkleTree {
    /// `layers[0]` are the leaves, the last layer holds the root.
    layers: Vec<Vec<Digest>>,
}

impl MerkleTree {
    pub fn from_leaves(leaves: Vec<Digest>) -> Result<Self> {
        if leaves.is_empty() || !leaves.len().is_power_of_two() {
            return Err(Error::Size(format!("Merkle tree over {} leaves", leaves.len())));
        }
        let mut layers = vec![leaves];
        while layers.last().map_or(0, Vec::len) > 1 {
            let prev = layers.last().expect("nonempty");
            let next = prev.chunks(2).map(|p| hash_node(&p[0], &p[1])).collect();
            layers.push(next);
        }
        Ok(MerkleTree { layers })
    }

    pub fn root(&self) -> Digest {
        self.layers.last().expect("nonempty")[0]
    }

    pub fn num_leaves(&self) -> usize {
        self.layers[0].len()
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Sibling digests from leaf level upward.
    pub fn path(&self, index: usize) -> Vec<Digest> {
        let mut idx = index;
        let mut out = Vec::with_capacity(self.depth());
        for layer in &self.layers[..self.layers.len() - 1] {
            out.push(layer[idx ^ 1]);
            idx >>= 1;
        }
        out
    }
}

pub fn verify_path(root: &Digest, index: usize, leaf: Digest, path: &[Digest]) -> bool {
    let mut acc = leaf;
    let mut idx = index;
    for sib in path {
        acc = if idx & 1 == 0 { hash_node(&acc, sib) } else { hash_node(sib, &acc) };
        idx >>= 1;
    }
    idx == 0 && acc == *root
}
