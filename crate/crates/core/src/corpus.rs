//! Manuscript records and JSONL ingestion.
//!
//! One line of input is one submission event:
//!
//! ```json
//! {"id": "M1", "journal_id": "J1", "title": "...", "abstract": "...",
//!  "submitted_at": "2020-01-01", "decided_at": null, "decision": "pending",
//!  "transferred_from": null}
//! ```
//!
//! Malformed lines are skipped and reported with their line number. A
//! repeated id aborts ingestion unless [`IngestOptions::skip_duplicate_ids`]
//! is set.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Pending,
    Rejected,
    Accepted,
    Published,
    Withdrawn,
}

impl Decision {
    pub fn is_acceptance(self) -> bool {
        matches!(self, Decision::Accepted | Decision::Published)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Pending => "pending",
            Decision::Rejected => "rejected",
            Decision::Accepted => "accepted",
            Decision::Published => "published",
            Decision::Withdrawn => "withdrawn",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManuscriptRecord {
    pub id: String,
    pub journal_id: String,
    pub title: String,
    #[serde(default)]
    pub r#abstract: String,
    pub submitted_at: NaiveDate,
    #[serde(default)]
    pub decided_at: Option<NaiveDate>,
    pub decision: Decision,
    #[serde(default)]
    pub transferred_from: Option<String>,
}

impl ManuscriptRecord {
    /// Checks the per-record invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id must be non-empty".into());
        }
        match (self.decision, self.decided_at) {
            (Decision::Pending, Some(_)) => {
                return Err("pending manuscript must not have decided_at".into())
            }
            (d, None) if d != Decision::Pending => {
                return Err(format!("decision {d} requires decided_at"))
            }
            _ => {}
        }
        if let Some(decided) = self.decided_at {
            if decided < self.submitted_at {
                return Err(format!(
                    "decided_at {decided} is before submitted_at {}",
                    self.submitted_at
                ));
            }
        }
        if self.transferred_from.as_deref() == Some(self.id.as_str()) {
            return Err("transferred_from must not reference the record itself".into());
        }
        Ok(())
    }

    /// Latest date carried by this record.
    pub fn last_date(&self) -> NaiveDate {
        self.decided_at.unwrap_or(self.submitted_at).max(self.submitted_at)
    }
}

/// An immutable, id-indexed collection of records in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<ManuscriptRecord>,
    id_index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting invalid records and repeated ids.
    pub fn from_records(records: Vec<ManuscriptRecord>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for (i, record) in records.into_iter().enumerate() {
            record
                .validate()
                .map_err(|message| Error::InvalidRecord {
                    index: i + 1,
                    message,
                })?;
            if corpus.id_index.contains_key(&record.id) {
                return Err(Error::DuplicateId {
                    line: i + 1,
                    id: record.id,
                });
            }
            corpus.push(record);
        }
        Ok(corpus)
    }

    fn push(&mut self, record: ManuscriptRecord) {
        self.id_index.insert(record.id.clone(), self.records.len());
        self.records.push(record);
    }

    pub fn records(&self) -> &[ManuscriptRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&ManuscriptRecord> {
        self.id_index.get(id).map(|&pos| &self.records[pos])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Latest submission or decision date in the corpus.
    pub fn max_date(&self) -> Option<NaiveDate> {
        self.records.iter().map(ManuscriptRecord::last_date).max()
    }

    pub fn into_records(self) -> Vec<ManuscriptRecord> {
        self.records
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Skip (and count) records whose id was already seen instead of failing.
    pub skip_duplicate_ids: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub corpus: Corpus,
    pub lines_read: usize,
    pub malformed: usize,
    pub skipped_duplicates: usize,
    pub errors: Vec<LineError>,
}

/// Reads JSONL records from `reader`. Blank lines are ignored.
pub fn ingest<R: BufRead>(reader: R, options: IngestOptions) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        report.lines_read = line_no;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManuscriptRecord = match serde_json::from_str(&line) {
            Ok(record) => record,
            Err(err) => {
                report.malformed += 1;
                report.errors.push(LineError {
                    line: line_no,
                    message: err.to_string(),
                });
                continue;
            }
        };
        if let Err(message) = record.validate() {
            report.malformed += 1;
            report.errors.push(LineError {
                line: line_no,
                message,
            });
            continue;
        }
        if report.corpus.id_index.contains_key(&record.id) {
            if !options.skip_duplicate_ids {
                return Err(Error::DuplicateId {
                    line: line_no,
                    id: record.id,
                });
            }
            report.skipped_duplicates += 1;
            report.errors.push(LineError {
                line: line_no,
                message: format!("duplicate id {:?} skipped", record.id),
            });
            continue;
        }
        report.corpus.push(record);
    }
    Ok(report)
}

/// Serializes records as JSONL in corpus order.
pub fn write_jsonl<W: std::io::Write>(records: &[ManuscriptRecord], mut out: W) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, sub: &str, decided: Option<&str>, decision: &str) -> String {
        serde_json::json!({
            "id": id, "journal_id": "J1", "title": "t", "abstract": "a",
            "submitted_at": sub, "decided_at": decided, "decision": decision,
            "transferred_from": null
        })
        .to_string()
    }

    #[test]
    fn loads_valid_lines_in_order() {
        let input = [
            line("M1", "2020-01-01", None, "pending"),
            line("M2", "2020-01-02", Some("2020-02-01"), "rejected"),
            line("M3", "2020-01-03", Some("2020-03-01"), "published"),
        ]
        .join("\n");
        let report = ingest(input.as_bytes(), IngestOptions::default()).unwrap();
        let ids: Vec<_> = report.corpus.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["M1", "M2", "M3"]);
        assert_eq!(report.malformed, 0);
        assert_eq!(report.corpus.position("M2"), Some(1));
    }

    #[test]
    fn decided_before_submitted_is_a_line_error() {
        let input = [
            line("M1", "2020-01-01", None, "pending"),
            line("M2", "2020-03-01", Some("2020-02-01"), "rejected"),
        ]
        .join("\n");
        let report = ingest(input.as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(report.corpus.len(), 1);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.errors[0].line, 2);
        assert!(report.errors[0].message.contains("before submitted_at"));
    }

    #[test]
    fn pending_iff_no_decision_date() {
        let input = [
            line("M1", "2020-01-01", Some("2020-01-05"), "pending"),
            line("M2", "2020-01-01", None, "accepted"),
        ]
        .join("\n");
        let report = ingest(input.as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(report.malformed, 2);
        assert!(report.corpus.is_empty());
    }

    #[test]
    fn duplicate_id_is_fatal_by_default() {
        let input = [
            line("M1", "2020-01-01", None, "pending"),
            line("M1", "2020-01-02", None, "pending"),
        ]
        .join("\n");
        match ingest(input.as_bytes(), IngestOptions::default()) {
            Err(Error::DuplicateId { line, id }) => {
                assert_eq!(line, 2);
                assert_eq!(id, "M1");
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
        let report = ingest(
            input.as_bytes(),
            IngestOptions {
                skip_duplicate_ids: true,
            },
        )
        .unwrap();
        assert_eq!(report.corpus.len(), 1);
        assert_eq!(report.skipped_duplicates, 1);
    }

    #[test]
    fn malformed_json_is_counted_and_skipped() {
        let input = format!(
            "{}\nnot json\n\n{{\"id\": \"M2\"}}\n",
            line("M1", "2020-01-01", None, "pending")
        );
        let report = ingest(input.as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(report.corpus.len(), 1);
        assert_eq!(report.malformed, 2);
        assert_eq!(
            report.errors.iter().map(|e| e.line).collect::<Vec<_>>(),
            [2, 4]
        );
    }

    #[test]
    fn missing_abstract_defaults_to_empty() {
        let input = r#"{"id":"M1","journal_id":"J","title":"x","submitted_at":"2020-01-01","decision":"pending"}"#;
        let report = ingest(input.as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(report.corpus.records()[0].r#abstract, "");
    }

    #[test]
    fn ingest_is_idempotent() {
        let input = [
            line("M1", "2020-01-01", None, "pending"),
            line("M2", "2020-01-02", Some("2020-02-01"), "rejected"),
        ]
        .join("\n");
        let a = ingest(input.as_bytes(), IngestOptions::default()).unwrap();
        let b = ingest(input.as_bytes(), IngestOptions::default()).unwrap();
        assert_eq!(a.corpus, b.corpus);
    }

    #[test]
    fn jsonl_field_names_are_exact() {
        let record = ManuscriptRecord {
            id: "M1".into(),
            journal_id: "J1".into(),
            title: "T".into(),
            r#abstract: "A".into(),
            submitted_at: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            decided_at: None,
            decision: Decision::Pending,
            transferred_from: None,
        };
        let mut out = Vec::new();
        write_jsonl(&[record], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"id\":\"M1\",\"journal_id\":\"J1\",\"title\":\"T\",\"abstract\":\"A\",\
             \"submitted_at\":\"2020-01-01\",\"decided_at\":null,\"decision\":\"pending\",\
             \"transferred_from\":null}\n"
        );
    }
}
