//! Manuscript journeys: the chronological path of a duplicate cluster
//! through journals.
//!
//! A step is a *bad transfer* when its journal already handled an earlier
//! step of the same journey.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Decision};
use crate::dedup::DuplicateCluster;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JourneyStep {
    pub manuscript_id: String,
    pub journal_id: String,
    pub submitted_at: NaiveDate,
    pub decision: Decision,
    pub decided_at: Option<NaiveDate>,
    pub transferred_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Journey {
    pub cluster_id: usize,
    /// Ordered by `(submitted_at, manuscript_id)`.
    pub steps: Vec<JourneyStep>,
    /// Indices of steps whose journal appears at a strictly earlier step.
    pub bad_transfer_steps: Vec<usize>,
}

impl Journey {
    pub fn from_steps(cluster_id: usize, mut steps: Vec<JourneyStep>) -> Self {
        steps.sort_by(|x, y| {
            (x.submitted_at, &x.manuscript_id).cmp(&(y.submitted_at, &y.manuscript_id))
        });
        let mut seen = HashSet::new();
        let bad_transfer_steps = steps
            .iter()
            .enumerate()
            .filter(|(_, s)| !seen.insert(s.journal_id.as_str()))
            .map(|(i, _)| i)
            .collect();
        Journey {
            cluster_id,
            steps,
            bad_transfer_steps,
        }
    }

    /// Index of the step this one was transferred from: the explicit
    /// `transferred_from` when it names a step of this journey, otherwise the
    /// previous step.
    pub fn predecessor(&self, step: usize) -> Option<usize> {
        if step == 0 || step >= self.steps.len() {
            return None;
        }
        if let Some(from) = &self.steps[step].transferred_from {
            if let Some(pos) = self.steps[..step]
                .iter()
                .position(|s| &s.manuscript_id == from)
            {
                return Some(pos);
            }
        }
        Some(step - 1)
    }
}

pub fn build_journeys(corpus: &Corpus, clusters: &[DuplicateCluster]) -> Result<Vec<Journey>> {
    clusters
        .par_iter()
        .filter(|c| c.member_ids.len() >= 2)
        .map(|c| {
            let steps = c
                .member_ids
                .iter()
                .map(|id| {
                    let r = corpus.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
                    Ok(JourneyStep {
                        manuscript_id: r.id.clone(),
                        journal_id: r.journal_id.clone(),
                        submitted_at: r.submitted_at,
                        decision: r.decision,
                        decided_at: r.decided_at,
                        transferred_from: r.transferred_from.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Journey::from_steps(c.cluster_id, steps))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDestination {
    pub journal_id: String,
    /// `(accepted + 1) / (support + 2)`.
    pub smoothed_rate: f64,
    pub accepted: usize,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecommendation {
    pub from_journal: String,
    pub ranked_destinations: Vec<RankedDestination>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Ranks journals by how often manuscripts rejected at `from_journal` were
/// accepted at the next journal they went to. Steps that are still pending
/// have no outcome and are not counted.
pub fn recommend_transfers(
    journeys: &[Journey],
    from_journal: &str,
    min_support: usize,
) -> TransferRecommendation {
    let seen = journeys
        .iter()
        .flat_map(|j| &j.steps)
        .any(|s| s.journal_id == from_journal);
    if !seen {
        return TransferRecommendation {
            from_journal: from_journal.to_owned(),
            ranked_destinations: Vec::new(),
            warning: Some(format!("journal {from_journal:?} does not occur in any journey")),
        };
    }

    // destination -> (accepted, decided)
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for journey in journeys {
        for (i, step) in journey.steps.iter().enumerate() {
            let Some(prev) = journey.predecessor(i) else {
                continue;
            };
            let prev = &journey.steps[prev];
            if prev.journal_id != from_journal
                || prev.decision != Decision::Rejected
                || step.journal_id == from_journal
                || step.decision == Decision::Pending
            {
                continue;
            }
            let entry = tally.entry(step.journal_id.as_str()).or_default();
            entry.1 += 1;
            if step.decision.is_acceptance() {
                entry.0 += 1;
            }
        }
    }

    let mut ranked: Vec<RankedDestination> = tally
        .into_iter()
        .filter(|&(_, (_, support))| support >= min_support)
        .map(|(journal, (accepted, support))| RankedDestination {
            journal_id: journal.to_owned(),
            smoothed_rate: (accepted as f64 + 1.0) / (support as f64 + 2.0),
            accepted,
            support,
        })
        .collect();
    ranked.sort_by(|x, y| {
        y.smoothed_rate
            .total_cmp(&x.smoothed_rate)
            .then_with(|| y.support.cmp(&x.support))
            .then_with(|| x.journal_id.cmp(&y.journal_id))
    });
    TransferRecommendation {
        from_journal: from_journal.to_owned(),
        ranked_destinations: ranked,
        warning: None,
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn write_journey_body(out: &mut String, journey: &Journey) {
    let c = journey.cluster_id;
    let bad: HashSet<usize> = journey.bad_transfer_steps.iter().copied().collect();
    let _ = writeln!(out, "  subgraph cluster_{c} {{");
    let _ = writeln!(out, "    label=\"cluster {c}\";");
    for (i, step) in journey.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "    \"c{c}_s{i}\" [label=\"{}\\n{}\", tooltip=\"{}\"];",
            escape_dot(&step.journal_id),
            step.submitted_at,
            escape_dot(&step.manuscript_id)
        );
    }
    let _ = writeln!(out, "  }}");
    for i in 1..journey.steps.len() {
        if bad.contains(&i) {
            let _ = writeln!(out, "  \"c{c}_s{}\" -> \"c{c}_s{i}\" [color=red];", i - 1);
        } else {
            let _ = writeln!(out, "  \"c{c}_s{}\" -> \"c{c}_s{i}\";", i - 1);
        }
    }
}

const DOT_HEADER: &str = "digraph journeys {\n  rankdir=LR;\n  node [shape=box];\n";

/// DOT rendering of several journeys, one subgraph per cluster. Edges join
/// consecutive steps; the edge into a bad-transfer step is red.
pub fn export_journeys(journeys: &[Journey]) -> String {
    let mut out = String::from(DOT_HEADER);
    for journey in journeys {
        write_journey_body(&mut out, journey);
    }
    out.push_str("}\n");
    out
}

pub fn export_journey(journey: &Journey) -> String {
    export_journeys(std::slice::from_ref(journey))
}

/// Journal multiplicities in a journey.
pub fn journal_counts(journey: &Journey) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for s in &journey.steps {
        *counts.entry(s.journal_id.as_str()).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ManuscriptRecord;
    use crate::dedup::cluster;
    use crate::lsh::VerifiedPair;

    fn step(id: &str, journal: &str, day: u32, decision: Decision) -> JourneyStep {
        let submitted_at = NaiveDate::from_ymd_opt(2020, 1, day).unwrap();
        JourneyStep {
            manuscript_id: id.into(),
            journal_id: journal.into(),
            submitted_at,
            decision,
            decided_at: (decision != Decision::Pending).then_some(submitted_at),
            transferred_from: None,
        }
    }

    #[test]
    fn journal_revisit_is_a_bad_transfer() {
        let j = Journey::from_steps(
            0,
            vec![
                step("C", "J1", 20, Decision::Pending),
                step("A", "J1", 1, Decision::Rejected),
                step("B", "J2", 10, Decision::Rejected),
            ],
        );
        let order: Vec<_> = j.steps.iter().map(|s| s.manuscript_id.as_str()).collect();
        assert_eq!(order, ["A", "B", "C"]);
        assert_eq!(j.bad_transfer_steps, [2]);
    }

    #[test]
    fn distinct_journals_have_no_bad_transfer() {
        let j = Journey::from_steps(
            0,
            vec![
                step("A", "J1", 1, Decision::Rejected),
                step("B", "J2", 2, Decision::Rejected),
                step("C", "J3", 3, Decision::Accepted),
            ],
        );
        assert!(j.bad_transfer_steps.is_empty());
    }

    #[test]
    fn ties_on_date_break_by_id() {
        let j = Journey::from_steps(
            0,
            vec![step("B", "J2", 1, Decision::Pending), step("A", "J1", 1, Decision::Pending)],
        );
        assert_eq!(j.steps[0].manuscript_id, "A");
    }

    #[test]
    fn journeys_built_from_clusters_ignore_corpus_order() {
        let records: Vec<ManuscriptRecord> = [("A", "J1", 1), ("B", "J2", 5), ("C", "J1", 9)]
            .iter()
            .map(|&(id, j, d)| ManuscriptRecord {
                id: id.into(),
                journal_id: j.into(),
                title: String::new(),
                r#abstract: String::new(),
                submitted_at: NaiveDate::from_ymd_opt(2020, 1, d).unwrap(),
                decided_at: None,
                decision: Decision::Pending,
                transferred_from: None,
            })
            .collect();
        let pairs = vec![
            VerifiedPair { id_a: "A".into(), id_b: "B".into(), jaccard: 1.0, estimated: 1.0 },
            VerifiedPair { id_a: "B".into(), id_b: "C".into(), jaccard: 1.0, estimated: 1.0 },
        ];
        let clusters = cluster(&pairs);
        let forward = build_journeys(&Corpus::from_records(records.clone()).unwrap(), &clusters).unwrap();
        let mut shuffled = records;
        shuffled.rotate_left(1);
        let again = build_journeys(&Corpus::from_records(shuffled).unwrap(), &clusters).unwrap();
        assert_eq!(forward, again);
        assert_eq!(forward[0].bad_transfer_steps, [2]);
    }

    fn history(dest: &str, accepted: usize, total: usize) -> Vec<Journey> {
        (0..total)
            .map(|i| {
                let outcome = if i < accepted { Decision::Accepted } else { Decision::Rejected };
                Journey::from_steps(
                    i,
                    vec![step("x", "J1", 1, Decision::Rejected), step("y", dest, 2, outcome)],
                )
            })
            .collect()
    }

    #[test]
    fn smoothed_rates_rank_destinations() {
        let mut journeys = history("J2", 8, 10);
        journeys.extend(history("J3", 1, 5));
        let rec = recommend_transfers(&journeys, "J1", 3);
        let ranked: Vec<_> = rec
            .ranked_destinations
            .iter()
            .map(|d| (d.journal_id.as_str(), d.smoothed_rate))
            .collect();
        // (8+1)/(10+2) = 0.75, (1+1)/(5+2) = 2/7
        assert_eq!(ranked, [("J2", 0.75), ("J3", 2.0 / 7.0)]);
        assert!(rec.warning.is_none());
    }

    #[test]
    fn single_acceptance_is_two_thirds() {
        let rec = recommend_transfers(&history("J2", 1, 1), "J1", 1);
        assert_eq!(rec.ranked_destinations.len(), 1);
        assert_eq!(rec.ranked_destinations[0].smoothed_rate, 2.0 / 3.0);
    }

    #[test]
    fn min_support_filters_destinations() {
        let rec = recommend_transfers(&history("J2", 1, 1), "J1", 3);
        assert!(rec.ranked_destinations.is_empty());
    }

    #[test]
    fn no_history_after_journal_gives_empty_ranking() {
        let journeys = history("J2", 1, 1);
        let rec = recommend_transfers(&journeys, "J2", 1);
        assert!(rec.ranked_destinations.is_empty());
        assert!(rec.warning.is_none());
        let rec = recommend_transfers(&journeys, "J404", 1);
        assert!(rec.ranked_destinations.is_empty());
        assert!(rec.warning.is_some());
    }

    #[test]
    fn source_journal_never_recommended_to_itself() {
        let mut journeys = history("J1", 3, 3);
        journeys.extend(history("J2", 0, 3));
        let rec = recommend_transfers(&journeys, "J1", 1);
        assert!(rec.ranked_destinations.iter().all(|d| d.journal_id != "J1"));
        assert_eq!(rec.ranked_destinations.len(), 1);
    }

    #[test]
    fn explicit_transfer_source_overrides_previous_step() {
        // J1 rejects A, B goes to J2, C was transferred from A rather than B
        let mut c = step("C", "J3", 3, Decision::Accepted);
        c.transferred_from = Some("A".into());
        let j = Journey::from_steps(
            0,
            vec![step("A", "J1", 1, Decision::Rejected), step("B", "J2", 2, Decision::Rejected), c],
        );
        assert_eq!(j.predecessor(2), Some(0));
        let rec = recommend_transfers(&[j], "J1", 1);
        let ids: Vec<_> = rec.ranked_destinations.iter().map(|d| d.journal_id.as_str()).collect();
        // J3: 1/1 accepted → 2/3; J2: 0/1 → 1/3
        assert_eq!(ids, ["J3", "J2"]);
    }

    #[test]
    fn extra_acceptance_never_lowers_rank() {
        let base = {
            let mut j = history("J2", 2, 6);
            j.extend(history("J3", 3, 6));
            j.extend(history("J4", 1, 6));
            j
        };
        let rank_of = |journeys: &[Journey], dest: &str| {
            recommend_transfers(journeys, "J1", 1)
                .ranked_destinations
                .iter()
                .position(|d| d.journal_id == dest)
                .unwrap()
        };
        for dest in ["J2", "J3", "J4"] {
            let before = rank_of(&base, dest);
            let mut more = base.clone();
            more.extend(history(dest, 1, 1));
            assert!(rank_of(&more, dest) <= before, "{dest}");
        }
    }

    #[test]
    fn dot_export_counts() {
        let j = Journey::from_steps(
            3,
            vec![
                step("A", "J1", 1, Decision::Rejected),
                step("B", "J2", 2, Decision::Rejected),
                step("C", "J1", 3, Decision::Pending),
            ],
        );
        let dot = export_journey(&j);
        assert_eq!(dot.matches(" [label=").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert_eq!(dot.matches("color=red").count(), 1);
        assert!(dot.contains("\"c3_s1\" -> \"c3_s2\" [color=red];"));
    }

    #[test]
    fn dot_template_is_exact() {
        let j = Journey::from_steps(
            0,
            vec![step("A", "J1", 1, Decision::Rejected), step("B", "J\"2", 2, Decision::Pending)],
        );
        assert_eq!(
            export_journey(&j),
            "digraph journeys {\n  rankdir=LR;\n  node [shape=box];\n  subgraph cluster_0 {\n    label=\"cluster 0\";\n    \"c0_s0\" [label=\"J1\\n2020-01-01\", tooltip=\"A\"];\n    \"c0_s1\" [label=\"J\\\"2\\n2020-01-02\", tooltip=\"B\"];\n  }\n  \"c0_s0\" -> \"c0_s1\";\n}\n"
        );
    }

    #[test]
    fn empty_journey_list_is_an_empty_graph() {
        assert_eq!(export_journeys(&[]), "digraph journeys {\n  rankdir=LR;\n  node [shape=box];\n}\n");
    }
}
