//! End-to-end composition: shingle, sign, index, verify, cluster, classify,
//! build journeys and aggregate statistics, plus the output directory layout.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::corpus::{Corpus, IngestReport, LineError};
use crate::dedup::{
    classify_clusters, cluster, select_published_duplicates, select_simultaneous, stats,
    DuplicateCluster, PairClassification, StatsReport,
};
use crate::error::Result;
use crate::journeys::{build_journeys, export_journeys, Journey};
use crate::lsh::{write_pairs_csv, write_pairs_jsonl, LshIndex, VerifiedPair};
use crate::minhash::{HashFamily, MinHashSignature};
use crate::shingling::{shingle, shingle_text, ShingleSet, ShingleStore};
use crate::snapshot;

/// A corpus together with its shingles, signatures and LSH index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedCorpus {
    pub config: PipelineConfig,
    pub corpus: Corpus,
    pub shingles: ShingleStore,
    /// Ids of records that produced no shingle and are not indexed.
    pub too_short: Vec<String>,
    pub index: LshIndex,
}

impl IndexedCorpus {
    pub fn build(corpus: Corpus, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let k = config.shingle_k;
        let sets: Vec<ShingleSet> = corpus.records().par_iter().map(|r| shingle(r, k)).collect();
        let too_short = sets
            .iter()
            .filter(|s| s.too_short)
            .map(|s| s.manuscript_id.clone())
            .collect();

        let family = HashFamily::new(config.num_hashes, config.seed);
        let signatures: Vec<MinHashSignature> = sets
            .par_iter()
            .filter(|s| !s.too_short)
            .map(|s| family.sign(s))
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("sign"))?;
        let index = LshIndex::build(signatures, config.bands, config.rows)
            .map_err(|e| e.in_stage("build"))?;
        Ok(IndexedCorpus {
            config: config.clone(),
            corpus,
            shingles: ShingleStore::new(sets),
            too_short,
            index,
        })
    }

    pub fn family(&self) -> HashFamily {
        HashFamily::new(self.config.num_hashes, self.config.seed)
    }

    /// Candidate generation followed by exact verification.
    pub fn verified_pairs(&self, threshold: f64) -> Result<Vec<VerifiedPair>> {
        let candidates = self.index.candidates();
        self.index
            .verify(&candidates, &self.shingles, threshold)
            .map_err(|e| e.in_stage("verify"))
    }

    /// Screens a new manuscript against the indexed corpus.
    pub fn query(
        &self,
        probe_id: &str,
        title: &str,
        abstract_text: &str,
        threshold: f64,
    ) -> Result<Vec<VerifiedPair>> {
        let probe = shingle_text(probe_id, title, abstract_text, self.config.shingle_k);
        if probe.too_short {
            return Ok(Vec::new());
        }
        let signature = self.family().sign(&probe)?;
        self.index.query(&signature, &probe, &self.shingles, threshold)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub index_ms: u128,
    pub verify_ms: u128,
    pub analyze_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub pairs: Vec<VerifiedPair>,
    pub clusters: Vec<DuplicateCluster>,
    pub classifications: Vec<PairClassification>,
    pub simultaneous: Vec<PairClassification>,
    pub published_duplicates: Vec<PairClassification>,
    pub journeys: Vec<Journey>,
    pub stats: StatsReport,
}

/// Runs everything downstream of the index.
pub fn analyze(indexed: &IndexedCorpus) -> Result<Analysis> {
    let pairs = indexed.verified_pairs(indexed.config.threshold)?;
    analyze_pairs(indexed, pairs)
}

pub fn analyze_pairs(indexed: &IndexedCorpus, pairs: Vec<VerifiedPair>) -> Result<Analysis> {
    let corpus = &indexed.corpus;
    let clusters = cluster(&pairs);
    let classifications = classify_clusters(corpus, &clusters, &indexed.config.policy())
        .map_err(|e| e.in_stage("classify"))?;
    let journeys = build_journeys(corpus, &clusters).map_err(|e| e.in_stage("journeys"))?;
    let report = stats(corpus, &clusters, &classifications, &journeys)
        .map_err(|e| e.in_stage("stats"))?;
    Ok(Analysis {
        simultaneous: select_simultaneous(&classifications),
        published_duplicates: select_published_duplicates(&classifications),
        pairs,
        clusters,
        classifications,
        journeys,
        stats: report,
    })
}

/// Everything `run` produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub indexed: IndexedCorpus,
    pub analysis: Analysis,
    pub timings: StageTimings,
}

pub fn run(corpus: Corpus, config: &PipelineConfig) -> Result<RunOutput> {
    let t0 = Instant::now();
    let indexed = IndexedCorpus::build(corpus, config)?;
    let t1 = Instant::now();
    let pairs = indexed.verified_pairs(config.threshold)?;
    let t2 = Instant::now();
    let analysis = analyze_pairs(&indexed, pairs)?;
    let t3 = Instant::now();
    Ok(RunOutput {
        indexed,
        analysis,
        timings: StageTimings {
            index_ms: (t1 - t0).as_millis(),
            verify_ms: (t2 - t1).as_millis(),
            analyze_ms: (t3 - t2).as_millis(),
        },
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    pub file_name: String,
    pub sha256: String,
    pub bytes: usize,
    pub lines: usize,
    pub records: usize,
    pub malformed: usize,
    pub skipped_duplicates: usize,
}

impl InputInfo {
    pub fn describe(path: &Path, bytes: &[u8], report: &IngestReport) -> Self {
        InputInfo {
            file_name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
            lines: report.lines_read,
            records: report.corpus.len(),
            malformed: report.malformed,
            skipped_duplicates: report.skipped_duplicates,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageCounts {
    pub records: usize,
    pub too_short: usize,
    pub indexed: usize,
    pub candidates: usize,
    pub verified_pairs: usize,
    pub clusters: usize,
    pub classified_pairs: usize,
    pub simultaneous_flags: usize,
    pub published_duplicate_flags: usize,
    pub journeys: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub snapshot_format: u32,
    pub config: PipelineConfig,
    pub input: InputInfo,
    pub counts: StageCounts,
    pub outputs: Vec<OutputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<StageTimings>,
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes the full result set and a manifest into `dir`. File contents are a
/// pure function of the input bytes and the configuration unless `timings`
/// is given.
pub fn write_output_dir(
    dir: &Path,
    output: &RunOutput,
    input: InputInfo,
    ingest_errors: &[LineError],
    timings: Option<StageTimings>,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let analysis = &output.analysis;
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();

    files.push(("snapshot.bin", snapshot::to_bytes(&output.indexed)?));
    let mut csv = Vec::new();
    write_pairs_csv(&analysis.pairs, &mut csv)?;
    files.push(("pairs.csv", csv));
    let mut pairs_jsonl = Vec::new();
    write_pairs_jsonl(&analysis.pairs, &mut pairs_jsonl)?;
    files.push(("pairs.jsonl", pairs_jsonl));
    files.push(("clusters.jsonl", jsonl(&analysis.clusters)?));
    files.push(("classifications.jsonl", jsonl(&analysis.classifications)?));
    files.push(("simultaneous.jsonl", jsonl(&analysis.simultaneous)?));
    files.push(("published_duplicates.jsonl", jsonl(&analysis.published_duplicates)?));
    files.push(("journeys.jsonl", jsonl(&analysis.journeys)?));
    files.push(("journeys.dot", export_journeys(&analysis.journeys).into_bytes()));
    files.push(("stats.json", pretty_json(&analysis.stats)?));
    files.push(("stats.txt", analysis.stats.to_table().into_bytes()));
    files.push(("too_short.jsonl", jsonl(&output.indexed.too_short)?));
    files.push(("ingest_errors.jsonl", jsonl(ingest_errors)?));

    let mut outputs = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = dir.join(name);
        let mut f = BufWriter::new(File::create(&path)?);
        f.write_all(bytes)?;
        f.flush()?;
        outputs.push(OutputFile {
            file: (*name).to_owned(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
    }

    let candidates = output.indexed.index.candidates().len();
    let manifest = Manifest {
        tool: "dupescan",
        version: env!("CARGO_PKG_VERSION"),
        snapshot_format: snapshot::FORMAT_VERSION,
        config: output.indexed.config.clone(),
        input,
        counts: StageCounts {
            records: output.indexed.corpus.len(),
            too_short: output.indexed.too_short.len(),
            indexed: output.indexed.index.len(),
            candidates,
            verified_pairs: analysis.pairs.len(),
            clusters: analysis.clusters.len(),
            classified_pairs: analysis.classifications.len(),
            simultaneous_flags: analysis.simultaneous.len(),
            published_duplicate_flags: analysis.published_duplicates.len(),
            journeys: analysis.journeys.len(),
        },
        outputs,
        timings_ms: timings,
    };
    fs::write(dir.join("manifest.json"), pretty_json(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Decision, ManuscriptRecord};

    fn record(id: &str, title: &str, sub: &str) -> ManuscriptRecord {
        ManuscriptRecord {
            id: id.into(),
            journal_id: "J1".into(),
            title: title.into(),
            r#abstract: "an abstract long enough to shingle a few times over".into(),
            submitted_at: sub.parse().unwrap(),
            decided_at: None,
            decision: Decision::Pending,
            transferred_from: None,
        }
    }

    #[test]
    fn empty_input_gives_zero_stats() {
        let out = run(Corpus::default(), &PipelineConfig::default()).unwrap();
        assert!(out.analysis.pairs.is_empty());
        assert_eq!(out.analysis.stats, StatsReport::default());
    }

    #[test]
    fn two_identical_records_one_pair_one_cluster() {
        let corpus = Corpus::from_records(vec![
            record("A", "Detecting near duplicate manuscripts", "2020-01-01"),
            record("B", "Detecting near duplicate manuscripts", "2020-02-01"),
        ])
        .unwrap();
        let out = run(corpus, &PipelineConfig::default()).unwrap();
        assert_eq!(out.analysis.pairs.len(), 1);
        assert_eq!(out.analysis.pairs[0].jaccard, 1.0);
        assert_eq!(out.analysis.clusters.len(), 1);
        assert_eq!(out.analysis.stats.manuscripts_with_earlier_duplicate.fraction, 0.5);
    }

    #[test]
    fn too_short_records_are_reported_not_indexed() {
        let mut short = record("S", "tiny", "2020-01-01");
        short.r#abstract.clear();
        let corpus = Corpus::from_records(vec![short, record("A", "normal title here", "2020-01-01")]).unwrap();
        let ix = IndexedCorpus::build(corpus, &PipelineConfig::default()).unwrap();
        assert_eq!(ix.too_short, ["S"]);
        assert_eq!(ix.index.len(), 1);
    }

    #[test]
    fn invalid_config_is_a_config_error() {
        let config = PipelineConfig { bands: 3, ..Default::default() };
        assert!(run(Corpus::default(), &config).unwrap_err().is_config());
    }

    #[test]
    fn query_screens_a_probe() {
        let corpus = Corpus::from_records(vec![record("A", "Detecting near duplicate manuscripts", "2020-01-01")]).unwrap();
        let ix = IndexedCorpus::build(corpus, &PipelineConfig::default()).unwrap();
        let hits = ix
            .query(
                "probe",
                "Detecting near duplicate manuscripts",
                "an abstract long enough to shingle a few times over",
                0.8,
            )
            .unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].id_a, "A");
    }

    #[test]
    fn output_directory_has_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_records(vec![
            record("A", "Detecting near duplicate manuscripts", "2020-01-01"),
            record("B", "Detecting near duplicate manuscripts", "2020-02-01"),
        ])
        .unwrap();
        let out = run(corpus, &PipelineConfig::default()).unwrap();
        let report = IngestReport::default();
        let info = InputInfo::describe(Path::new("in.jsonl"), b"", &report);
        let manifest = write_output_dir(dir.path(), &out, info, &[], None).unwrap();
        assert!(dir.path().join("manifest.json").exists());
        for f in &manifest.outputs {
            let bytes = fs::read(dir.path().join(&f.file)).unwrap();
            assert_eq!(sha256_hex(&bytes), f.sha256);
        }
        let csv = fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
        assert_eq!(csv, "id_a,id_b,jaccard,estimated\nA,B,1.0,1.0\n");
    }
}
