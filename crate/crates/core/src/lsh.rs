//! Banded LSH index, candidate generation and exact verification.
//!
//! A signature of `n = bands · rows` values is cut into `bands` slices of
//! `rows` consecutive values. Each slice is hashed (salted with its band
//! index) to a bucket key; two manuscripts sharing any bucket become a
//! candidate pair. Candidates are then verified against the exact shingle
//! Jaccard, so every emitted [`VerifiedPair`] satisfies `jaccard >= t`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::minhash::{estimate_jaccard, MinHashSignature};
use crate::shingling::{exact_jaccard, ShingleSet, ShingleStore};

pub type BandTable = BTreeMap<u64, Vec<u32>>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidatePair {
    pub id_a: String,
    pub id_b: String,
}

impl CandidatePair {
    /// Orders the ids so that `id_a < id_b`. Returns `None` for a self-pair.
    pub fn new(x: &str, y: &str) -> Option<Self> {
        match x.cmp(y) {
            std::cmp::Ordering::Less => Some(CandidatePair {
                id_a: x.to_owned(),
                id_b: y.to_owned(),
            }),
            std::cmp::Ordering::Greater => Some(CandidatePair {
                id_a: y.to_owned(),
                id_b: x.to_owned(),
            }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedPair {
    pub id_a: String,
    pub id_b: String,
    /// Exact shingle-set Jaccard.
    pub jaccard: f64,
    /// Signature agreement.
    pub estimated: f64,
}

/// Bucket key of one band: xxh3 of the band's values (little endian) seeded
/// with the band index.
pub fn band_key(band: usize, values: &[u64]) -> u64 {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    xxh3_64_with_seed(&bytes, band as u64)
}

/// Probability that a pair with signature agreement `s` shares at least one
/// band: `1 − (1 − s^r)^b`.
pub fn candidate_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

/// A frozen LSH index. Construction is the only mutation; every query method
/// takes `&self`, so a built index can be shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    family: Option<u64>,
    signatures: Vec<MinHashSignature>,
    positions: HashMap<String, u32>,
    tables: Vec<BandTable>,
}

impl LshIndex {
    /// Indexes `signatures`; bucket contents follow input order.
    pub fn build(signatures: Vec<MinHashSignature>, bands: usize, rows: usize) -> Result<Self> {
        if bands == 0 || rows == 0 {
            return Err(Error::Config(format!(
                "bands ({bands}) and rows ({rows}) must be positive"
            )));
        }
        let n = bands * rows;
        let mut family = None;
        let mut positions = HashMap::with_capacity(signatures.len());
        for (pos, sig) in signatures.iter().enumerate() {
            if sig.len() != n {
                return Err(Error::Config(format!(
                    "signature of {} has {} values but bands × rows = {bands} × {rows} = {n}",
                    sig.manuscript_id,
                    sig.len()
                )));
            }
            match family {
                None => family = Some(sig.family),
                Some(f) if f != sig.family => {
                    return Err(Error::SignatureMismatch(format!(
                        "{} was signed with a different hash family",
                        sig.manuscript_id
                    )))
                }
                _ => {}
            }
            let pos = u32::try_from(pos)
                .map_err(|_| Error::Config("index holds at most 2^32 signatures".into()))?;
            if positions.insert(sig.manuscript_id.clone(), pos).is_some() {
                return Err(Error::DuplicateId {
                    line: pos as usize + 1,
                    id: sig.manuscript_id.clone(),
                });
            }
        }
        // one table per band, each filled by a single worker
        let tables = (0..bands)
            .into_par_iter()
            .map(|band| {
                let mut table = BandTable::new();
                for (pos, sig) in signatures.iter().enumerate() {
                    let key = band_key(band, &sig.values[band * rows..(band + 1) * rows]);
                    table.entry(key).or_default().push(pos as u32);
                }
                table
            })
            .collect();
        Ok(LshIndex {
            bands,
            rows,
            family,
            signatures,
            positions,
            tables,
        })
    }

    /// Reassembles an index from stored parts, checking that the tables are
    /// exactly what [`LshIndex::build`] would produce.
    pub fn from_parts(
        signatures: Vec<MinHashSignature>,
        bands: usize,
        rows: usize,
        tables: Vec<BandTable>,
    ) -> Result<Self> {
        let index = Self::build(signatures, bands, rows)?;
        if index.tables != tables {
            return Err(Error::CorruptSnapshot(
                "band tables do not match the stored signatures".into(),
            ));
        }
        Ok(index)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn signatures(&self) -> &[MinHashSignature] {
        &self.signatures
    }

    pub fn signature(&self, id: &str) -> Option<&MinHashSignature> {
        self.positions.get(id).map(|&p| &self.signatures[p as usize])
    }

    pub fn tables(&self) -> &[BandTable] {
        &self.tables
    }

    /// All unordered id pairs sharing at least one bucket, sorted by
    /// `(id_a, id_b)`.
    pub fn candidates(&self) -> Vec<CandidatePair> {
        let per_band: Vec<HashSet<(u32, u32)>> = self
            .tables
            .par_iter()
            .map(|table| {
                let mut pairs = HashSet::new();
                for bucket in table.values().filter(|b| b.len() > 1) {
                    for (i, &x) in bucket.iter().enumerate() {
                        for &y in &bucket[i + 1..] {
                            pairs.insert((x.min(y), x.max(y)));
                        }
                    }
                }
                pairs
            })
            .collect();
        let mut all: HashSet<(u32, u32)> = HashSet::new();
        for pairs in per_band {
            all.extend(pairs);
        }
        let mut out: Vec<CandidatePair> = all
            .into_iter()
            .filter_map(|(x, y)| {
                CandidatePair::new(
                    &self.signatures[x as usize].manuscript_id,
                    &self.signatures[y as usize].manuscript_id,
                )
            })
            .collect();
        out.par_sort_unstable();
        out
    }

    /// Keeps the candidates whose exact Jaccard is at least `threshold`.
    pub fn verify(
        &self,
        pairs: &[CandidatePair],
        shingles: &ShingleStore,
        threshold: f64,
    ) -> Result<Vec<VerifiedPair>> {
        let checked: Result<Vec<Option<VerifiedPair>>> = pairs
            .par_iter()
            .map(|pair| {
                let a = shingles
                    .get(&pair.id_a)
                    .ok_or_else(|| Error::MissingShingles(pair.id_a.clone()))?;
                let b = shingles
                    .get(&pair.id_b)
                    .ok_or_else(|| Error::MissingShingles(pair.id_b.clone()))?;
                let jaccard = exact_jaccard(a, b);
                if jaccard < threshold {
                    return Ok(None);
                }
                let sa = self
                    .signature(&pair.id_a)
                    .ok_or_else(|| Error::UnknownId(pair.id_a.clone()))?;
                let sb = self
                    .signature(&pair.id_b)
                    .ok_or_else(|| Error::UnknownId(pair.id_b.clone()))?;
                Ok(Some(VerifiedPair {
                    id_a: pair.id_a.clone(),
                    id_b: pair.id_b.clone(),
                    jaccard,
                    estimated: estimate_jaccard(sa, sb)?,
                }))
            })
            .collect();
        let mut out: Vec<VerifiedPair> = checked?.into_iter().flatten().collect();
        out.sort_by(|x, y| (&x.id_a, &x.id_b).cmp(&(&y.id_a, &y.id_b)));
        Ok(out)
    }

    /// Screens one probe against the indexed corpus. An indexed manuscript
    /// with the probe's own id is skipped.
    pub fn query(
        &self,
        signature: &MinHashSignature,
        probe: &ShingleSet,
        shingles: &ShingleStore,
        threshold: f64,
    ) -> Result<Vec<VerifiedPair>> {
        if let Some(family) = self.family {
            if signature.family != family {
                return Err(Error::SignatureMismatch(
                    "probe was signed with a different hash family than the index".into(),
                ));
            }
        }
        if signature.len() != self.bands * self.rows {
            return Err(Error::SignatureMismatch(format!(
                "probe signature has {} values, index expects {}",
                signature.len(),
                self.bands * self.rows
            )));
        }
        let mut hits = BTreeSet::new();
        for (band, table) in self.tables.iter().enumerate() {
            let key = band_key(
                band,
                &signature.values[band * self.rows..(band + 1) * self.rows],
            );
            if let Some(bucket) = table.get(&key) {
                hits.extend(bucket.iter().copied());
            }
        }
        let mut out = Vec::new();
        for pos in hits {
            let indexed = &self.signatures[pos as usize];
            let Some(pair) = CandidatePair::new(&signature.manuscript_id, &indexed.manuscript_id)
            else {
                continue;
            };
            let other = shingles
                .get(&indexed.manuscript_id)
                .ok_or_else(|| Error::MissingShingles(indexed.manuscript_id.clone()))?;
            let jaccard = exact_jaccard(probe, other);
            if jaccard >= threshold {
                out.push(VerifiedPair {
                    id_a: pair.id_a,
                    id_b: pair.id_b,
                    jaccard,
                    estimated: estimate_jaccard(signature, indexed)?,
                });
            }
        }
        out.sort_by(|x, y| {
            y.jaccard
                .total_cmp(&x.jaccard)
                .then_with(|| (&x.id_a, &x.id_b).cmp(&(&y.id_a, &y.id_b)))
        });
        Ok(out)
    }
}

/// Writes `id_a,id_b,jaccard,estimated` with a header row.
pub fn write_pairs_csv<W: Write>(pairs: &[VerifiedPair], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(["id_a", "id_b", "jaccard", "estimated"])?;
    for pair in pairs {
        writer.serialize(pair)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_pairs_jsonl<W: Write>(pairs: &[VerifiedPair], mut out: W) -> Result<()> {
    for pair in pairs {
        serde_json::to_writer(&mut out, pair)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
