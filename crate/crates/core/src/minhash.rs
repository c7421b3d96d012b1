//! MinHash signatures over shingle sets.
//!
//! Each of the `n` hash functions is an affine map `(a·x + b) mod p` over the
//! Mersenne prime `p = 2^61 − 1`, with `(a, b)` drawn from a ChaCha8 stream
//! seeded by the family seed. Shingle values are reduced mod `p` first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};
use crate::shingling::ShingleSet;

pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[inline]
fn reduce(x: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let x = (x & p) + (x >> 61);
    let x = (x & p) + (x >> 61);
    let x = x as u64;
    if x >= MERSENNE_61 {
        x - MERSENNE_61
    } else {
        x
    }
}

/// `(a·x + b) mod 2^61−1`.
#[inline]
pub fn affine_hash(a: u64, b: u64, x: u64) -> u64 {
    let x = x % MERSENNE_61;
    reduce(a as u128 * x as u128 + b as u128)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamily {
    seed: u64,
    params: Vec<(u64, u64)>,
}

impl HashFamily {
    pub fn new(num_hashes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..num_hashes)
            .map(|_| {
                let a = rng.gen_range(1..MERSENNE_61);
                let b = rng.gen_range(0..MERSENNE_61);
                (a, b)
            })
            .collect();
        HashFamily { seed, params }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[(u64, u64)] {
        &self.params
    }

    /// Identifies the family; signatures are comparable only when equal.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(16);
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        xxh3_64(&bytes)
    }

    pub fn sign(&self, shingles: &ShingleSet) -> Result<MinHashSignature> {
        if shingles.is_empty() {
            return Err(Error::EmptyShingleSet(shingles.manuscript_id.clone()));
        }
        let mut values = vec![u64::MAX; self.params.len()];
        for &s in &shingles.shingles {
            for (slot, &(a, b)) in values.iter_mut().zip(&self.params) {
                let h = affine_hash(a, b, s);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Ok(MinHashSignature {
            manuscript_id: shingles.manuscript_id.clone(),
            family: self.fingerprint(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub manuscript_id: String,
    /// Fingerprint of the [`HashFamily`] that produced the values.
    pub family: u64,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_compatible(&self, other: &MinHashSignature) -> Result<()> {
        if self.family != other.family {
            return Err(Error::SignatureMismatch(format!(
                "{} and {} come from different hash families",
                self.manuscript_id, other.manuscript_id
            )));
        }
        if self.values.len() != other.values.len() {
            return Err(Error::SignatureMismatch(format!(
                "lengths differ ({} vs {})",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(())
    }
}

/// Fraction of positions where the two signatures agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    a.check_compatible(b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let agree = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.values.len() as f64)
}
