//! Duplicate clusters and editorial analytics.
//!
//! Verified pairs are closed transitively into clusters. Every pair of
//! cluster members is then classified from dates, journals and decisions:
//!
//! * *simultaneous*: active intervals overlap by at least one day at
//!   different journals. A record is active from `submitted_at` through
//!   `decided_at`, or through the analysis date while pending.
//! * *resubmission*: the later record was submitted strictly after the
//!   earlier one was rejected.
//! * *published duplicate*: both records were accepted or published.
//!
//! A pair may carry several of these; its label is the most severe one
//! (published duplicate, then simultaneous, then resubmission).

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Decision, ManuscriptRecord};
use crate::error::{Error, Result};
use crate::journeys::Journey;
use crate::lsh::VerifiedPair;

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let (mut x, mut y) = (self.find(x), self.find(y));
        if x == y {
            return false;
        }
        if self.rank[x] < self.rank[y] {
            std::mem::swap(&mut x, &mut y);
        }
        self.parent[y] = x;
        if self.rank[x] == self.rank[y] {
            self.rank[x] += 1;
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateCluster {
    pub cluster_id: usize,
    /// Sorted member ids.
    pub member_ids: Vec<String>,
    /// Verified pairs inside the cluster, sorted by ids.
    pub pairs: Vec<VerifiedPair>,
}

/// Connected components of the verified-pair graph. Cluster ids follow the
/// order of each cluster's smallest member id.
pub fn cluster(pairs: &[VerifiedPair]) -> Vec<DuplicateCluster> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for pair in pairs {
        ids.insert(&pair.id_a, 0);
        ids.insert(&pair.id_b, 0);
    }
    for (i, slot) in ids.values_mut().enumerate() {
        *slot = i;
    }
    let mut uf = UnionFind::new(ids.len());
    for pair in pairs {
        uf.union(ids[pair.id_a.as_str()], ids[pair.id_b.as_str()]);
    }

    // ids iterate in sorted order, so each group's first member is its minimum
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut group_of_root: HashMap<usize, usize> = HashMap::new();
    for (&id, &i) in &ids {
        let root = uf.find(i);
        let g = *group_of_root.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(id.to_owned());
    }

    let mut clusters: Vec<DuplicateCluster> = groups
        .into_iter()
        .enumerate()
        .map(|(cluster_id, member_ids)| DuplicateCluster {
            cluster_id,
            member_ids,
            pairs: Vec::new(),
        })
        .collect();
    for pair in pairs {
        let root = uf.find(ids[pair.id_a.as_str()]);
        clusters[group_of_root[&root]].pairs.push(pair.clone());
    }
    for c in &mut clusters {
        c.pairs
            .sort_by(|x, y| (&x.id_a, &x.id_b).cmp(&(&y.id_a, &y.id_b)));
        c.pairs.dedup_by(|x, y| x.id_a == y.id_a && x.id_b == y.id_b);
    }
    clusters
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationPolicy {
    /// End of the active interval of pending records. Defaults to the latest
    /// date in the corpus.
    pub analysis_date: Option<NaiveDate>,
    /// Count a withdrawal like a rejection when detecting resubmissions.
    pub withdrawn_as_rejection: bool,
}

impl ClassificationPolicy {
    pub fn resolved_analysis_date(&self, corpus: &Corpus) -> Option<NaiveDate> {
        self.analysis_date.or_else(|| corpus.max_date())
    }

    fn counts_as_rejection(&self, decision: Decision) -> bool {
        decision == Decision::Rejected
            || (self.withdrawn_as_rejection && decision == Decision::Withdrawn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    PublishedDuplicate,
    Simultaneous,
    Resubmission,
    Other,
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairKind::PublishedDuplicate => "published_duplicate",
            PairKind::Simultaneous => "simultaneous",
            PairKind::Resubmission => "resubmission",
            PairKind::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionFacts {
    pub id: String,
    pub journal_id: String,
    pub submitted_at: NaiveDate,
    pub decided_at: Option<NaiveDate>,
    pub decision: Decision,
    /// Last day of the active interval.
    pub active_until: NaiveDate,
}

/// Everything the label was derived from, with the chronologically earlier
/// record first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub earlier: SubmissionFacts,
    pub later: SubmissionFacts,
    pub overlap_days: i64,
    pub distinct_journals: bool,
    pub simultaneous: bool,
    pub resubmission: bool,
    pub published_duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassification {
    pub id_a: String,
    pub id_b: String,
    pub cluster_id: Option<usize>,
    /// Exact Jaccard when the pair was verified directly; `None` for pairs
    /// joined only through the cluster.
    pub jaccard: Option<f64>,
    pub kind: PairKind,
    pub evidence: Evidence,
}

fn facts(record: &ManuscriptRecord, analysis_date: Option<NaiveDate>) -> SubmissionFacts {
    let active_until = match record.decided_at {
        Some(d) => d,
        None => analysis_date
            .unwrap_or(record.submitted_at)
            .max(record.submitted_at),
    };
    SubmissionFacts {
        id: record.id.clone(),
        journal_id: record.journal_id.clone(),
        submitted_at: record.submitted_at,
        decided_at: record.decided_at,
        decision: record.decision,
        active_until,
    }
}

fn classify_records(
    x: &ManuscriptRecord,
    y: &ManuscriptRecord,
    analysis_date: Option<NaiveDate>,
    policy: &ClassificationPolicy,
) -> (PairKind, Evidence) {
    let (earlier, later) = if (x.submitted_at, &x.id) <= (y.submitted_at, &y.id) {
        (x, y)
    } else {
        (y, x)
    };
    let e = facts(earlier, analysis_date);
    let l = facts(later, analysis_date);
    let start = e.submitted_at.max(l.submitted_at);
    let end = e.active_until.min(l.active_until);
    let overlap_days = ((end - start).num_days() + 1).max(0);
    let distinct_journals = e.journal_id != l.journal_id;
    let simultaneous = overlap_days >= 1 && distinct_journals;
    let resubmission = policy.counts_as_rejection(earlier.decision)
        && earlier.decided_at.is_some_and(|d| later.submitted_at > d);
    let published_duplicate = earlier.decision.is_acceptance() && later.decision.is_acceptance();
    let kind = if published_duplicate {
        PairKind::PublishedDuplicate
    } else if simultaneous {
        PairKind::Simultaneous
    } else if resubmission {
        PairKind::Resubmission
    } else {
        PairKind::Other
    };
    let evidence = Evidence {
        earlier: e,
        later: l,
        overlap_days,
        distinct_journals,
        simultaneous,
        resubmission,
        published_duplicate,
    };
    (kind, evidence)
}

fn classify_ids(
    x: &str,
    y: &str,
    jaccard: Option<f64>,
    cluster_id: Option<usize>,
    corpus: &Corpus,
    analysis_date: Option<NaiveDate>,
    policy: &ClassificationPolicy,
) -> Result<PairClassification> {
    let rx = corpus.get(x).ok_or_else(|| Error::UnknownId(x.to_owned()))?;
    let ry = corpus.get(y).ok_or_else(|| Error::UnknownId(y.to_owned()))?;
    let (kind, evidence) = classify_records(rx, ry, analysis_date, policy);
    let (id_a, id_b) = if x <= y { (x, y) } else { (y, x) };
    Ok(PairClassification {
        id_a: id_a.to_owned(),
        id_b: id_b.to_owned(),
        cluster_id,
        jaccard,
        kind,
        evidence,
    })
}

/// Labels one verified pair. The result does not depend on which member is
/// `id_a`.
pub fn classify_pair(
    pair: &VerifiedPair,
    corpus: &Corpus,
    policy: &ClassificationPolicy,
) -> Result<PairClassification> {
    classify_ids(
        &pair.id_a,
        &pair.id_b,
        Some(pair.jaccard),
        None,
        corpus,
        policy.resolved_analysis_date(corpus),
        policy,
    )
}

/// Classifies every pair of members inside every cluster.
pub fn classify_clusters(
    corpus: &Corpus,
    clusters: &[DuplicateCluster],
    policy: &ClassificationPolicy,
) -> Result<Vec<PairClassification>> {
    let analysis_date = policy.resolved_analysis_date(corpus);
    let per_cluster: Result<Vec<Vec<PairClassification>>> = clusters
        .par_iter()
        .map(|c| {
            let direct: HashMap<(&str, &str), f64> = c
                .pairs
                .iter()
                .map(|p| ((p.id_a.as_str(), p.id_b.as_str()), p.jaccard))
                .collect();
            let mut out = Vec::new();
            for (i, a) in c.member_ids.iter().enumerate() {
                for b in &c.member_ids[i + 1..] {
                    let (x, y) = if a <= b { (a, b) } else { (b, a) };
                    let jaccard = direct.get(&(x.as_str(), y.as_str())).copied();
                    out.push(classify_ids(
                        x,
                        y,
                        jaccard,
                        Some(c.cluster_id),
                        corpus,
                        analysis_date,
                        policy,
                    )?);
                }
            }
            Ok(out)
        })
        .collect();
    Ok(per_cluster?.into_iter().flatten().collect())
}

/// Intra-cluster pairs that were under review at two journals at once,
/// longest overlap first.
pub fn find_simultaneous(
    corpus: &Corpus,
    clusters: &[DuplicateCluster],
    policy: &ClassificationPolicy,
) -> Result<Vec<PairClassification>> {
    let all = classify_clusters(corpus, clusters, policy)?;
    Ok(select_simultaneous(&all))
}

pub fn select_simultaneous(classified: &[PairClassification]) -> Vec<PairClassification> {
    let mut flags: Vec<PairClassification> = classified
        .iter()
        .filter(|c| c.evidence.simultaneous)
        .cloned()
        .collect();
    flags.sort_by(|x, y| {
        y.evidence
            .overlap_days
            .cmp(&x.evidence.overlap_days)
            .then_with(|| (&x.id_a, &x.id_b).cmp(&(&y.id_a, &y.id_b)))
    });
    flags
}

/// Intra-cluster pairs where both members were accepted or published.
pub fn find_published_duplicates(
    corpus: &Corpus,
    clusters: &[DuplicateCluster],
) -> Result<Vec<PairClassification>> {
    let all = classify_clusters(corpus, clusters, &ClassificationPolicy::default())?;
    Ok(select_published_duplicates(&all))
}

pub fn select_published_duplicates(classified: &[PairClassification]) -> Vec<PairClassification> {
    classified
        .iter()
        .filter(|c| c.evidence.published_duplicate)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Fraction {
    pub count: usize,
    pub fraction: f64,
}

impl Fraction {
    pub fn of(count: usize, total: usize) -> Self {
        let fraction = if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        };
        Fraction { count, fraction }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_manuscripts: usize,
    pub verified_pairs: usize,
    pub clusters: usize,
    pub clustered_manuscripts: usize,
    pub manuscripts_with_earlier_duplicate: Fraction,
    /// Over directly verified pairs.
    pub resubmission_pair_fraction: Fraction,
    /// Over all intra-cluster pairs.
    pub resubmission_pair_fraction_clustered: Fraction,
    pub simultaneous_pairs: usize,
    pub simultaneous_manuscript_fraction: Fraction,
    pub published_duplicate_pair_count: usize,
    pub transfers: usize,
    /// Over transfers (journey steps after the first).
    pub bad_transfer_fraction: Fraction,
}

/// Aggregates the editorial statistics. `classifications` must be the output
/// of [`classify_clusters`] for the same clusters.
pub fn stats(
    corpus: &Corpus,
    clusters: &[DuplicateCluster],
    classifications: &[PairClassification],
    journeys: &[Journey],
) -> Result<StatsReport> {
    let total = corpus.len();
    let mut with_earlier = 0;
    let mut clustered = 0;
    let mut verified = 0;
    for c in clusters {
        clustered += c.member_ids.len();
        verified += c.pairs.len();
        let dates = c
            .member_ids
            .iter()
            .map(|id| {
                corpus
                    .get(id)
                    .map(|r| r.submitted_at)
                    .ok_or_else(|| Error::UnknownId(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(&first) = dates.iter().min() {
            with_earlier += dates.iter().filter(|&&d| d > first).count();
        }
    }

    let direct_resubmissions = classifications
        .iter()
        .filter(|c| c.jaccard.is_some() && c.evidence.resubmission)
        .count();
    let all_resubmissions = classifications
        .iter()
        .filter(|c| c.evidence.resubmission)
        .count();

    let simultaneous: Vec<&PairClassification> = classifications
        .iter()
        .filter(|c| c.evidence.simultaneous)
        .collect();
    let mut simultaneous_ids: Vec<&str> = simultaneous
        .iter()
        .flat_map(|c| [c.id_a.as_str(), c.id_b.as_str()])
        .collect();
    simultaneous_ids.sort_unstable();
    simultaneous_ids.dedup();

    let published = classifications
        .iter()
        .filter(|c| c.evidence.published_duplicate)
        .count();

    let transfers: usize = journeys.iter().map(|j| j.steps.len().saturating_sub(1)).sum();
    let bad: usize = journeys.iter().map(|j| j.bad_transfer_steps.len()).sum();

    Ok(StatsReport {
        total_manuscripts: total,
        verified_pairs: verified,
        clusters: clusters.len(),
        clustered_manuscripts: clustered,
        manuscripts_with_earlier_duplicate: Fraction::of(with_earlier, total),
        resubmission_pair_fraction: Fraction::of(direct_resubmissions, verified),
        resubmission_pair_fraction_clustered: Fraction::of(
            all_resubmissions,
            classifications.len(),
        ),
        simultaneous_pairs: simultaneous.len(),
        simultaneous_manuscript_fraction: Fraction::of(simultaneous_ids.len(), total),
        published_duplicate_pair_count: published,
        transfers,
        bad_transfer_fraction: Fraction::of(bad, transfers),
    })
}

impl StatsReport {
    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let rows: [(&str, String); 11] = [
            ("manuscripts", self.total_manuscripts.to_string()),
            ("verified pairs", self.verified_pairs.to_string()),
            (
                "clusters",
                format!("{} ({} manuscripts)", self.clusters, self.clustered_manuscripts),
            ),
            (
                "with earlier near-duplicate",
                fmt_fraction(&self.manuscripts_with_earlier_duplicate),
            ),
            (
                "resubmission pairs (verified)",
                fmt_fraction(&self.resubmission_pair_fraction),
            ),
            (
                "resubmission pairs (clustered)",
                fmt_fraction(&self.resubmission_pair_fraction_clustered),
            ),
            ("simultaneous pairs", self.simultaneous_pairs.to_string()),
            (
                "simultaneous manuscripts",
                fmt_fraction(&self.simultaneous_manuscript_fraction),
            ),
            (
                "published duplicate pairs",
                self.published_duplicate_pair_count.to_string(),
            ),
            ("transfers", self.transfers.to_string()),
            ("bad transfers", fmt_fraction(&self.bad_transfer_fraction)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

fn fmt_fraction(f: &Fraction) -> String {
    format!("{} ({:.2}%)", f.count, f.fraction * 100.0)
}
