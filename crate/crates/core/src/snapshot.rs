//! Binary snapshot of an indexed corpus.
//!
//! Layout (all integers little endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `DUPESCAN`                          |
//! | 4     | format version (`u32`)                    |
//! | 8     | payload length in bytes (`u64`)           |
//! | n     | payload, bincode                          |
//! | 8     | xxh3-64 of the payload (`u64`)            |
//!
//! The payload holds the configuration, every record, every shingle set, the
//! signatures and the band tables. Tables are stored as sorted key lists so
//! that serialization is canonical and a load/save cycle is byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::config::PipelineConfig;
use crate::corpus::{Corpus, ManuscriptRecord};
use crate::error::{Error, Result};
use crate::lsh::{BandTable, LshIndex};
use crate::minhash::MinHashSignature;
use crate::pipeline::IndexedCorpus;
use crate::shingling::{ShingleSet, ShingleStore};

pub const MAGIC: &[u8; 8] = b"DUPESCAN";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Serialize, Deserialize)]
struct Payload {
    config: PipelineConfig,
    records: Vec<ManuscriptRecord>,
    shingles: Vec<ShingleSet>,
    too_short: Vec<String>,
    signatures: Vec<MinHashSignature>,
    tables: Vec<Vec<(u64, Vec<u32>)>>,
}

pub fn to_bytes(indexed: &IndexedCorpus) -> Result<Vec<u8>> {
    let payload = Payload {
        config: indexed.config.clone(),
        records: indexed.corpus.records().to_vec(),
        shingles: indexed.shingles.sets().to_vec(),
        too_short: indexed.too_short.clone(),
        signatures: indexed.index.signatures().to_vec(),
        tables: indexed
            .index
            .tables()
            .iter()
            .map(|t| t.iter().map(|(k, v)| (*k, v.clone())).collect())
            .collect(),
    };
    let body = bincode::serialize(&payload).map_err(|e| Error::Serialization(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&xxh3_64(&body).to_le_bytes());
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<IndexedCorpus> {
    if bytes.len() < HEADER_LEN + 8 || &bytes[..8] != MAGIC {
        return Err(Error::CorruptSnapshot("missing DUPESCAN header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::SnapshotVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    if bytes.len() != HEADER_LEN + len + 8 {
        return Err(Error::CorruptSnapshot(format!(
            "payload length {len} does not match file size {}",
            bytes.len()
        )));
    }
    let body = &bytes[HEADER_LEN..HEADER_LEN + len];
    let checksum = u64::from_le_bytes(bytes[HEADER_LEN + len..].try_into().expect("8 bytes"));
    if xxh3_64(body) != checksum {
        return Err(Error::CorruptSnapshot("checksum mismatch".into()));
    }
    let payload: Payload =
        bincode::deserialize(body).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    payload.config.validate()?;

    let corpus = Corpus::from_records(payload.records)
        .map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    let tables: Vec<BandTable> = payload
        .tables
        .into_iter()
        .map(|t| t.into_iter().collect())
        .collect();
    let index = LshIndex::from_parts(
        payload.signatures,
        payload.config.bands,
        payload.config.rows,
        tables,
    )?;
    Ok(IndexedCorpus {
        config: payload.config,
        corpus,
        shingles: ShingleStore::new(payload.shingles),
        too_short: payload.too_short,
        index,
    })
}

pub fn save<W: Write>(indexed: &IndexedCorpus, mut out: W) -> Result<()> {
    out.write_all(&to_bytes(indexed)?)?;
    out.flush()?;
    Ok(())
}

pub fn load<R: Read>(mut input: R) -> Result<IndexedCorpus> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

pub fn save_file(indexed: &IndexedCorpus, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(indexed)?)?;
    Ok(())
}

pub fn load_file(path: &Path) -> Result<IndexedCorpus> {
    from_bytes(&std::fs::read(path)?)
}

/// True when `bytes` start with the snapshot magic.
pub fn is_snapshot(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}
