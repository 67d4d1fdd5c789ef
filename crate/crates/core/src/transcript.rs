//! Fiat-Shamir transcript: a SHA-256 duplex with length-prefixed, tagged absorption.

use sha2::{Digest as _, Sha256};

use crate::field::{Ext, Fp};
use crate::hash::Digest;

const TAG_INIT: u8 = 0x10;
const TAG_ABSORB: u8 = 0x11;
const TAG_CHALLENGE: u8 = 0x12;
const TAG_SQUEEZE: u8 = 0x13;
const TAG_SCOPE_OPEN: u8 = 0x14;
const TAG_SCOPE_CLOSE: u8 = 0x15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    state: [u8; 32],
    scopes: Vec<Vec<u8>>,
}

impl Transcript {
    pub fn new(domain: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update([TAG_INIT]);
        h.update((domain.len() as u64).to_le_bytes());
        h.update(domain);
        Transcript { state: h.finalize().into(), scopes: Vec::new() }
    }

    pub fn state(&self) -> [u8; 32] {
        self.state
    }

    fn update(&mut self, tag: u8, label: &[u8], data: &[u8]) {
        debug_assert!(!label.is_empty(), "transcript labels must be nonempty");
        let mut h = Sha256::new();
        h.update([tag]);
        h.update(self.state);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label);
        h.update((data.len() as u64).to_le_bytes());
        h.update(data);
        self.state = h.finalize().into();
    }

    pub fn absorb(&mut self, label: &[u8], data: &[u8]) {
        self.update(TAG_ABSORB, label, data);
    }

    pub fn absorb_u64(&mut self, label: &[u8], v: u64) {
        self.absorb(label, &v.to_le_bytes());
    }

    pub fn absorb_digest(&mut self, label: &[u8], d: &Digest) {
        self.absorb(label, d.as_bytes());
    }

    pub fn absorb_fp(&mut self, label: &[u8], values: &[Fp]) {
        let mut buf = Vec::with_capacity(values.len() * 8);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.absorb(label, &buf);
    }

    pub fn absorb_ext(&mut self, label: &[u8], values: &[Ext]) {
        let mut buf = Vec::with_capacity(values.len() * 16);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.absorb(label, &buf);
    }

    /// Enters a named sub-protocol; nested scopes are bound into the state.
    pub fn begin_scope(&mut self, label: &[u8]) {
        self.update(TAG_SCOPE_OPEN, label, &(self.scopes.len() as u64).to_le_bytes());
        self.scopes.push(label.to_vec());
    }

    pub fn end_scope(&mut self) {
        let label = self.scopes.pop().expect("end_scope without begin_scope");
        self.update(TAG_SCOPE_CLOSE, &label, &(self.scopes.len() as u64).to_le_bytes());
    }

    /// Ratchets the state for a draw of `count` items, then yields a squeeze stream.
    fn squeeze_blocks(&mut self, label: &[u8], count: u64, blocks: usize) -> Vec<[u8; 32]> {
        self.update(TAG_CHALLENGE, label, &count.to_le_bytes());
        let seed = self.state;
        let out = (0..blocks as u64)
            .map(|i| {
                let mut h = Sha256::new();
                h.update([TAG_SQUEEZE]);
                h.update(seed);
                h.update(i.to_le_bytes());
                h.finalize().into()
            })
            .collect();
        // Ratchet past the squeezed output so no challenge can be replayed.
        let mut h = Sha256::new();
        h.update([TAG_SQUEEZE]);
        h.update(seed);
        h.update(u64::MAX.to_le_bytes());
        self.state = h.finalize().into();
        out
    }

    /// Draws `n` extension elements; each base limb reduces 128 squeezed bits.
    pub fn challenge_ext(&mut self, label: &[u8], n: usize) -> Vec<Ext> {
        let blocks = self.squeeze_blocks(label, n as u64, n);
        blocks
            .iter()
            .map(|b| {
                let lo = u128::from_le_bytes(b[..16].try_into().expect("16 bytes"));
                let hi = u128::from_le_bytes(b[16..].try_into().expect("16 bytes"));
                Ext::new(Fp::from_u128(lo), Fp::from_u128(hi))
            })
            .collect()
    }

    pub fn challenge_ext_one(&mut self, label: &[u8]) -> Ext {
        self.challenge_ext(label, 1)[0]
    }

    /// Draws `count` independent uniform indices in `[0, bound)`, in draw order.
    pub fn challenge_indices(&mut self, label: &[u8], count: usize, bound: usize) -> Vec<usize> {
        assert!(bound > 0, "empty index range");
        self.squeeze_blocks(label, count as u64, count)
            .into_iter()
            .map(|b| (u128::from_le_bytes(b[..16].try_into().expect("16 bytes")) % bound as u128) as usize)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_and_separation() {
        let mut a = Transcript::new(b"t");
        let mut b = Transcript::new(b"t");
        a.absorb(b"cm", b"xyz");
        b.absorb(b"cm", b"xyz");
        assert_eq!(a, b);
        assert_eq!(a.challenge_ext(b"c", 3), b.challenge_ext(b"c", 3));

        let mut c = Transcript::new(b"t");
        let mut d = Transcript::new(b"t");
        c.absorb(b"a", b"bc");
        d.absorb(b"ab", b"c");
        assert_ne!(c.state(), d.state());
    }

    #[test]
    fn draws_mutate_state() {
        let mut t = Transcript::new(b"t");
        let x = t.challenge_ext_one(b"r");
        let y = t.challenge_ext_one(b"r");
        assert_ne!(x, y);
        let before = t.state();
        assert!(t.challenge_ext(b"r", 0).is_empty());
        assert_ne!(before, t.state());
    }

    #[test]
    fn labels_change_challenges() {
        let mut collisions = 0;
        for i in 0..1000u64 {
            let mut a = Transcript::new(b"t");
            a.absorb_u64(b"i", i);
            let mut b = a.clone();
            if a.challenge_ext_one(b"alpha") == b.challenge_ext_one(b"beta") {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn indices_in_range_and_spread() {
        let mut t = Transcript::new(b"t");
        let idx = t.challenge_indices(b"cols", 100, 16);
        assert_eq!(idx.len(), 100);
        assert!(idx.iter().all(|i| *i < 16));
        let hit: std::collections::BTreeSet<_> = idx.iter().collect();
        assert_eq!(hit.len(), 16);
        let mut u = Transcript::new(b"t");
        assert_eq!(u.challenge_indices(b"cols", 100, 16), idx);
    }

    #[test]
    fn scopes_bind() {
        let mut a = Transcript::new(b"t");
        let mut b = Transcript::new(b"t");
        a.begin_scope(b"s");
        a.end_scope();
        assert_ne!(a.state(), b.state());
        b.begin_scope(b"s");
        b.end_scope();
        assert_eq!(a.state(), b.state());
    }
}
