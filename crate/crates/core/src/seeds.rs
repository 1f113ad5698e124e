//! Named seed derivation.
//!
//! Every random stream in a run is derived from one global seed and a path of
//! labels such as `("train", fold, "final")`, so one number reproduces the
//! whole pipeline and adding a new consumer never shifts existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// One component of a derivation path.
#[derive(Debug, Clone, Copy)]
pub enum Label<'a> {
    Name(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Name(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(i: u64) -> Self {
        Label::Index(i)
    }
}

impl From<usize> for Label<'_> {
    fn from(i: usize) -> Self {
        Label::Index(i as u64)
    }
}

/// Derive a child seed from `seed` and a label path.
pub fn derive(seed: u64, path: &[Label<'_>]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"dsb-seed");
    h.update(seed.to_le_bytes());
    for label in path {
        match label {
            Label::Name(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Label::Index(i) => {
                h.update([1u8]);
                h.update(i.to_le_bytes());
            }
        }
    }
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// Seeded generator for a derived stream.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent per-item stream `index` of `seed`. Results drawn from these
/// streams do not depend on the order in which items are processed.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

#[macro_export]
#[doc(hidden)]
macro_rules! seed_path {
    ($seed:expr $(, $label:expr)* $(,)?) => {
        $crate::seeds::derive($seed, &[$($crate::seeds::Label::from($label)),*])
    };
}
