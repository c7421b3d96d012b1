//! Seeded synthetic corpora with planted ground truth.
//!
//! The generator builds duplicate *families*: a root manuscript and one or
//! more later copies, each a lightly perturbed version of the root submitted
//! at a different time. Family shapes are chosen so that the planted rates
//! come out exactly:
//!
//! * simultaneous families: copies submitted elsewhere while the root is
//!   still under review;
//! * published-duplicate families: root and copy both published;
//! * bad-transfer families: `J1 (rejected) → J2 (rejected) → J1`;
//! * plain resubmission families: each copy submitted after the previous
//!   member was rejected, at a journal not seen before in the family.
//!
//! Everything else is an unrelated singleton. Before anything is returned,
//! every pair inside a family is checked to have exact Jaccard at least the
//! threshold.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::DEFAULT_SEED;
use crate::corpus::{write_jsonl, Decision, ManuscriptRecord};
use crate::error::{Error, Result};
use crate::shingling::{exact_jaccard, shingle_text};

const MAX_PERTURB_ATTEMPTS: usize = 200;
/// Longest family timeline the generator lays out, in days.
const MAX_FAMILY_SPAN: u64 = 3 * 150 + 2 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Probability that a word of a copy is replaced by a random word.
    pub replace_fraction: f64,
    /// Probability that a word of a copy is dropped.
    pub delete_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub size: usize,
    /// Fraction of manuscripts that have a near-duplicate submitted earlier.
    pub near_duplicate_rate: f64,
    /// Fraction of manuscripts involved in a simultaneous submission.
    pub simultaneous_rate: f64,
    /// Fraction of transfers (journey steps after the first) that return to
    /// a journal already visited.
    pub bad_transfer_rate: f64,
    pub published_duplicate_pairs: usize,
    pub perturbation: Perturbation,
    pub journal_count: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub seed: u64,
    pub threshold: f64,
    pub shingle_k: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            size: 1000,
            near_duplicate_rate: 0.25,
            simultaneous_rate: 0.025,
            bad_transfer_rate: 0.01,
            published_duplicate_pairs: 5,
            perturbation: Perturbation {
                replace_fraction: 0.01,
                delete_fraction: 0.005,
            },
            journal_count: 60,
            start_date: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            end_date: NaiveDate::from_ymd_opt(2020, 10, 31).expect("valid date"),
            seed: DEFAULT_SEED,
            threshold: 0.8,
            shingle_k: 3,
        }
    }
}

impl SynthSpec {
    /// A spec with every planted rate at zero.
    pub fn unrelated(size: usize, seed: u64) -> Self {
        SynthSpec {
            size,
            near_duplicate_rate: 0.0,
            simultaneous_rate: 0.0,
            bad_transfer_rate: 0.0,
            published_duplicate_pairs: 0,
            seed,
            ..SynthSpec::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("near_duplicate_rate", self.near_duplicate_rate),
            ("simultaneous_rate", self.simultaneous_rate),
            ("bad_transfer_rate", self.bad_transfer_rate),
            ("replace_fraction", self.perturbation.replace_fraction),
            ("delete_fraction", self.perturbation.delete_fraction),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InfeasibleSynth(format!("{name} must lie in [0, 1], got {rate}")));
            }
        }
        if self.perturbation.replace_fraction + self.perturbation.delete_fraction > 1.0 {
            return Err(Error::InfeasibleSynth(
                "replace_fraction + delete_fraction exceeds 1".into(),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InfeasibleSynth(format!("threshold {} outside (0, 1]", self.threshold)));
        }
        if self.shingle_k == 0 {
            return Err(Error::InfeasibleSynth("shingle_k must be at least 1".into()));
        }
        if self.journal_count < 3 {
            return Err(Error::InfeasibleSynth("journal_count must be at least 3".into()));
        }
        if self.end_date < self.start_date + Days::new(MAX_FAMILY_SPAN + 30) {
            return Err(Error::InfeasibleSynth(format!(
                "date range must span at least {} days",
                MAX_FAMILY_SPAN + 30
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateRelation {
    pub earlier: String,
    pub later: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    pub earlier_duplicate_fraction: f64,
    pub simultaneous_manuscript_fraction: f64,
    pub bad_transfer_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    /// One entry per copy, pointing at the family member just before it.
    pub duplicate_relationships: Vec<DuplicateRelation>,
    /// Every unordered pair inside a family, sorted.
    pub duplicate_pairs: Vec<(String, String)>,
    pub families: Vec<Vec<String>>,
    pub simultaneous_pairs: Vec<(String, String)>,
    pub published_duplicate_pairs: Vec<(String, String)>,
    pub bad_transfers: Vec<String>,
    pub transfers: usize,
    pub expected: ExpectedRates,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<ManuscriptRecord>,
    pub truth: GroundTruth,
}

impl SynthCorpus {
    pub fn write(&self, corpus_path: &Path, truth_path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(corpus_path)?);
        write_jsonl(&self.records, &mut out)?;
        out.flush()?;
        let mut truth = BufWriter::new(File::create(truth_path)?);
        serde_json::to_writer_pretty(&mut truth, &self.truth)?;
        truth.write_all(b"\n")?;
        truth.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FamilyKind {
    Simultaneous(usize),
    Published,
    BadTransfer,
    Resubmission(usize),
}

impl FamilyKind {
    fn members(self) -> usize {
        match self {
            FamilyKind::Simultaneous(n) | FamilyKind::Resubmission(n) => n,
            FamilyKind::Published => 2,
            FamilyKind::BadTransfer => 3,
        }
    }
}

/// Draft record referring to other drafts by index.
struct Draft {
    journal: usize,
    title: Vec<String>,
    abstract_words: Vec<String>,
    submitted_at: NaiveDate,
    decided_at: Option<NaiveDate>,
    decision: Decision,
    transferred_from: Option<usize>,
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    vocabulary: Vec<String>,
}

fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    const ONSETS: &[&str] = &[
        "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br",
        "st", "tr", "ch",
    ];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "eo"];
    let mut seen = std::collections::HashSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let syllables = rng.gen_range(2..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
        }
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

impl<'a> Generator<'a> {
    fn new(spec: &'a SynthSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let vocabulary = vocabulary(&mut rng, 8000);
        Generator {
            spec,
            rng,
            vocabulary,
        }
    }

    fn word(&mut self) -> String {
        self.vocabulary[self.rng.gen_range(0..self.vocabulary.len())].clone()
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }

    fn days(&mut self, lo: u64, hi: u64) -> Days {
        Days::new(self.rng.gen_range(lo..=hi))
    }

    fn date_in(&mut self, from: NaiveDate, to: NaiveDate) -> NaiveDate {
        let span = (to - from).num_days().max(0) as u64;
        from + Days::new(self.rng.gen_range(0..=span))
    }

    fn perturb_field(&mut self, words: &[String]) -> Vec<String> {
        let Perturbation {
            replace_fraction,
            delete_fraction,
        } = self.spec.perturbation;
        let mut out = Vec::with_capacity(words.len());
        for w in words {
            let r: f64 = self.rng.gen();
            if r < delete_fraction {
                continue;
            } else if r < delete_fraction + replace_fraction {
                out.push(self.word());
            } else {
                out.push(w.clone());
            }
        }
        if out.is_empty() {
            out.push(words.first().cloned().unwrap_or_else(|| self.word()));
        }
        out
    }

    fn text_of(title: &[String], abstract_words: &[String]) -> (String, String) {
        let mut title = title.join(" ");
        if let Some(first) = title.get(0..1) {
            let upper = first.to_uppercase();
            title.replace_range(0..1, &upper);
        }
        let abstract_text = if abstract_words.is_empty() {
            String::new()
        } else {
            format!("{}.", abstract_words.join(" "))
        };
        (title, abstract_text)
    }

    /// Text for a new family: root words plus one perturbed copy per later
    /// member, with every pair checked against the threshold.
    fn family_texts(&mut self, members: usize) -> Result<Vec<(Vec<String>, Vec<String>)>> {
        let title_len = self.rng.gen_range(8..=14);
        let abstract_len = self.rng.gen_range(60..=180);
        let root = (self.words(title_len), self.words(abstract_len));
        let shingles_of = |t: &[String], a: &[String], k| {
            let (t, a) = Self::text_of(t, a);
            shingle_text("", &t, &a, k)
        };
        let k = self.spec.shingle_k;
        let mut texts = vec![root.clone()];
        let mut sets = vec![shingles_of(&root.0, &root.1, k)];
        for _ in 1..members {
            let mut accepted = None;
            for _ in 0..MAX_PERTURB_ATTEMPTS {
                let title = self.perturb_field(&root.0);
                let abstract_words = self.perturb_field(&root.1);
                let set = shingles_of(&title, &abstract_words, k);
                if sets
                    .iter()
                    .all(|s| exact_jaccard(s, &set) >= self.spec.threshold)
                {
                    accepted = Some(((title, abstract_words), set));
                    break;
                }
            }
            let Some((text, set)) = accepted else {
                return Err(Error::InfeasibleSynth(format!(
                    "perturbation {:?} cannot keep copies at Jaccard >= {}",
                    self.spec.perturbation, self.spec.threshold
                )));
            };
            texts.push(text);
            sets.push(set);
        }
        Ok(texts)
    }

    fn distinct_journals(&mut self, n: usize) -> Vec<usize> {
        sample(&mut self.rng, self.spec.journal_count, n).into_vec()
    }

    fn family_start(&mut self) -> NaiveDate {
        let latest = self.spec.end_date - Days::new(MAX_FAMILY_SPAN);
        self.date_in(self.spec.start_date, latest)
    }

    fn final_decision(&mut self, choices: &[Decision]) -> Decision {
        *choices.choose(&mut self.rng).expect("non-empty")
    }

    fn decided(&mut self, submitted: NaiveDate, decision: Decision) -> Option<NaiveDate> {
        (decision != Decision::Pending).then(|| submitted + self.days(14, 150))
    }

    fn family(&mut self, kind: FamilyKind, base: usize) -> Result<Vec<Draft>> {
        let n = kind.members();
        let texts = self.family_texts(n)?;
        let start = self.family_start();
        let mut drafts = Vec::with_capacity(n);
        let mut push = |journal, submitted_at, decided_at, decision, from, text: &(Vec<String>, Vec<String>)| {
            drafts.push(Draft {
                journal,
                title: text.0.clone(),
                abstract_words: text.1.clone(),
                submitted_at,
                decided_at,
                decision,
                transferred_from: from,
            });
        };
        match kind {
            FamilyKind::Simultaneous(_) => {
                let journals = self.distinct_journals(n);
                let review = self.rng.gen_range(40..=150u64);
                let root_decided = start + Days::new(review);
                push(journals[0], start, Some(root_decided), Decision::Rejected, None, &texts[0]);
                for (i, text) in texts.iter().enumerate().skip(1) {
                    let offset = self.rng.gen_range(1..review);
                    let submitted = start + Days::new(offset);
                    let decision = if n > 2 {
                        Decision::Pending
                    } else {
                        self.final_decision(&[Decision::Pending, Decision::Rejected, Decision::Accepted])
                    };
                    let decided = self.decided(submitted, decision);
                    push(journals[i], submitted, decided, decision, None, text);
                }
            }
            FamilyKind::Published => {
                let journals = self.distinct_journals(2);
                let decided = start + self.days(30, 150);
                push(journals[0], start, Some(decided), Decision::Published, None, &texts[0]);
                let submitted = decided + self.days(1, 60);
                let later_decided = submitted + self.days(30, 150);
                push(journals[1], submitted, Some(later_decided), Decision::Published, None, &texts[1]);
            }
            FamilyKind::BadTransfer => {
                let journals = self.distinct_journals(2);
                let mut submitted = start;
                for (i, journal) in [journals[0], journals[1]].into_iter().enumerate() {
                    let decided = submitted + self.days(14, 150);
                    let from = (i > 0).then_some(base + i - 1);
                    push(journal, submitted, Some(decided), Decision::Rejected, from, &texts[i]);
                    submitted = decided + self.days(1, 60);
                }
                let decision = self.final_decision(&[Decision::Pending, Decision::Rejected, Decision::Accepted]);
                let decided = self.decided(submitted, decision);
                push(journals[0], submitted, decided, decision, Some(base + 1), &texts[2]);
            }
            FamilyKind::Resubmission(_) => {
                let journals = self.distinct_journals(n);
                let mut submitted = start;
                for i in 0..n {
                    let from = (i > 0 && self.rng.gen_bool(0.5)).then(|| base + i - 1);
                    let decision = if i + 1 < n {
                        Decision::Rejected
                    } else {
                        self.final_decision(&[
                            Decision::Pending,
                            Decision::Rejected,
                            Decision::Accepted,
                            Decision::Published,
                            Decision::Withdrawn,
                        ])
                    };
                    let decided = self.decided(submitted, decision);
                    push(journals[i], submitted, decided, decision, from, &texts[i]);
                    if let Some(d) = decided {
                        submitted = d + self.days(1, 60);
                    }
                }
            }
        }
        Ok(drafts)
    }

    fn singleton(&mut self) -> Draft {
        let roll: f64 = self.rng.gen();
        let (title_len, abstract_len) = if roll < 0.005 {
            // below the shingle size: exercises the too-short path
            (self.spec.shingle_k.saturating_sub(1).max(1), 0)
        } else if roll < 0.025 {
            (self.rng.gen_range(6..=14), 0)
        } else {
            (self.rng.gen_range(6..=14), self.rng.gen_range(40..=180))
        };
        let title = self.words(title_len);
        let abstract_words = self.words(abstract_len);
        let submitted_at = self.date_in(self.spec.start_date, self.spec.end_date - Days::new(150));
        let decision = {
            let r: f64 = self.rng.gen();
            match r {
                r if r < 0.15 => Decision::Pending,
                r if r < 0.65 => Decision::Rejected,
                r if r < 0.80 => Decision::Accepted,
                r if r < 0.95 => Decision::Published,
                _ => Decision::Withdrawn,
            }
        };
        let decided_at = self.decided(submitted_at, decision);
        Draft {
            journal: self.rng.gen_range(0..self.spec.journal_count),
            title,
            abstract_words,
            submitted_at,
            decided_at,
            decision,
            transferred_from: None,
        }
    }
}

fn plan_families(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<FamilyKind>> {
    let size = spec.size;
    let later_total = (size as f64 * spec.near_duplicate_rate).round() as usize;
    let simultaneous = (size as f64 * spec.simultaneous_rate).round() as usize;
    let bad = (later_total as f64 * spec.bad_transfer_rate).round() as usize;

    let mut families = Vec::new();
    match simultaneous {
        0 => {}
        1 => {
            return Err(Error::InfeasibleSynth(
                "a simultaneous submission involves at least two manuscripts".into(),
            ))
        }
        s => {
            let triples = s % 2;
            families.extend(std::iter::repeat_n(FamilyKind::Simultaneous(2), (s - 3 * triples) / 2));
            families.extend(std::iter::repeat_n(FamilyKind::Simultaneous(3), triples));
        }
    }
    families.extend(std::iter::repeat_n(FamilyKind::Published, spec.published_duplicate_pairs));
    families.extend(std::iter::repeat_n(FamilyKind::BadTransfer, bad));

    let used: usize = families.iter().map(|f| f.members() - 1).sum();
    let Some(mut remaining) = later_total.checked_sub(used) else {
        return Err(Error::InfeasibleSynth(format!(
            "near_duplicate_rate leaves {later_total} later copies but the simultaneous, \
             published and bad-transfer families need {used}"
        )));
    };
    while remaining > 0 {
        let later = if remaining >= 2 && rng.gen_bool(0.3) { 2 } else { 1 };
        families.push(FamilyKind::Resubmission(later + 1));
        remaining -= later;
    }
    let members: usize = families.iter().map(|f| f.members()).sum();
    if members > size {
        return Err(Error::InfeasibleSynth(format!(
            "planted families need {members} manuscripts but size is {size}"
        )));
    }
    Ok(families)
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Generates a corpus and its ground truth. Deterministic in `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut gen = Generator::new(spec);
    let families = plan_families(spec, &mut gen.rng)?;

    let mut drafts: Vec<Draft> = Vec::with_capacity(spec.size);
    let mut family_members: Vec<(FamilyKind, Vec<usize>)> = Vec::with_capacity(families.len());
    for kind in families {
        let base = drafts.len();
        let members = gen.family(kind, base)?;
        family_members.push((kind, (base..base + members.len()).collect()));
        drafts.extend(members);
    }
    while drafts.len() < spec.size {
        let d = gen.singleton();
        drafts.push(d);
    }

    // shuffle positions, then name records in output order
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.shuffle(&mut gen.rng);
    let mut name = vec![String::new(); drafts.len()];
    for (pos, &draft) in order.iter().enumerate() {
        name[draft] = format!("M{:06}", pos + 1);
    }
    let records: Vec<ManuscriptRecord> = order
        .iter()
        .map(|&i| {
            let d = &drafts[i];
            let (title, abstract_text) = Generator::text_of(&d.title, &d.abstract_words);
            ManuscriptRecord {
                id: name[i].clone(),
                journal_id: format!("J{:03}", d.journal + 1),
                title,
                r#abstract: abstract_text,
                submitted_at: d.submitted_at,
                decided_at: d.decided_at,
                decision: d.decision,
                transferred_from: d.transferred_from.map(|f| name[f].clone()),
            }
        })
        .collect();

    let mut relationships = Vec::new();
    let mut duplicate_pairs = Vec::new();
    let mut simultaneous_pairs = Vec::new();
    let mut published_pairs = Vec::new();
    let mut bad_transfers = Vec::new();
    let mut family_ids = Vec::new();
    for (kind, members) in &family_members {
        for w in members.windows(2) {
            relationships.push(DuplicateRelation {
                earlier: name[w[0]].clone(),
                later: name[w[1]].clone(),
            });
        }
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                let pair = ordered(&name[a], &name[b]);
                match kind {
                    FamilyKind::Simultaneous(_) => simultaneous_pairs.push(pair.clone()),
                    FamilyKind::Published => published_pairs.push(pair.clone()),
                    _ => {}
                }
                duplicate_pairs.push(pair);
            }
        }
        if *kind == FamilyKind::BadTransfer {
            bad_transfers.push(name[members[2]].clone());
        }
        let mut ids: Vec<String> = members.iter().map(|&m| name[m].clone()).collect();
        ids.sort();
        family_ids.push(ids);
    }
    relationships.sort_by(|x, y| x.later.cmp(&y.later));
    duplicate_pairs.sort();
    simultaneous_pairs.sort();
    published_pairs.sort();
    bad_transfers.sort();
    family_ids.sort();

    let transfers = relationships.len();
    let simultaneous_manuscripts: usize = family_members
        .iter()
        .filter(|(k, _)| matches!(k, FamilyKind::Simultaneous(_)))
        .map(|(_, m)| m.len())
        .sum();
    let frac = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let expected = ExpectedRates {
        earlier_duplicate_fraction: frac(transfers, spec.size),
        simultaneous_manuscript_fraction: frac(simultaneous_manuscripts, spec.size),
        bad_transfer_fraction: frac(bad_transfers.len(), transfers),
    };

    Ok(SynthCorpus {
        records,
        truth: GroundTruth {
            spec: spec.clone(),
            duplicate_relationships: relationships,
            duplicate_pairs,
            families: family_ids,
            simultaneous_pairs,
            published_duplicate_pairs: published_pairs,
            bad_transfers,
            transfers,
            expected,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shingling::shingle;
    use std::collections::HashMap;

    #[test]
    fn zero_rates_give_empty_truth() {
        let synth = generate_synthetic(&SynthSpec::unrelated(100, 1)).unwrap();
        assert_eq!(synth.records.len(), 100);
        assert!(synth.truth.duplicate_pairs.is_empty());
        assert!(synth.truth.duplicate_relationships.is_empty());
        assert!(synth.truth.simultaneous_pairs.is_empty());
        assert!(synth.truth.bad_transfers.is_empty());
        for r in &synth.records {
            r.validate().unwrap();
        }
    }

    #[test]
    fn planted_relationship_count_follows_rate() {
        let spec = SynthSpec {
            size: 1000,
            near_duplicate_rate: 0.25,
            ..SynthSpec::default()
        };
        let synth = generate_synthetic(&spec).unwrap();
        assert_eq!(synth.truth.duplicate_relationships.len(), 250);
        assert_eq!(synth.truth.expected.earlier_duplicate_fraction, 0.25);
        assert_eq!(synth.truth.published_duplicate_pairs.len(), 5);
        // round(0.025 × 1000) = 25 → 11 pairs + 1 triple
        assert_eq!(synth.truth.expected.simultaneous_manuscript_fraction, 0.025);
        // round(0.01 × 250) = 3
        assert_eq!(synth.truth.bad_transfers.len(), 3);
    }

    #[test]
    fn same_seed_same_output() {
        let spec = SynthSpec { size: 300, ..SynthSpec::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.truth, b.truth);
        let c = generate_synthetic(&SynthSpec { seed: 99, ..spec }).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn planted_pairs_meet_threshold_and_dates_are_consistent() {
        let spec = SynthSpec { size: 600, ..SynthSpec::default() };
        let synth = generate_synthetic(&spec).unwrap();
        let by_id: HashMap<&str, &ManuscriptRecord> =
            synth.records.iter().map(|r| (r.id.as_str(), r)).collect();
        for (a, b) in &synth.truth.duplicate_pairs {
            let j = exact_jaccard(&shingle(by_id[a.as_str()], 3), &shingle(by_id[b.as_str()], 3));
            assert!(j >= spec.threshold, "{a} {b} {j}");
        }
        for rel in &synth.truth.duplicate_relationships {
            assert!(by_id[rel.earlier.as_str()].submitted_at < by_id[rel.later.as_str()].submitted_at);
        }
        for r in &synth.records {
            r.validate().unwrap();
            assert!(r.submitted_at >= spec.start_date && r.last_date() <= spec.end_date);
        }
        for id in &synth.truth.bad_transfers {
            let r = by_id[id.as_str()];
            let from = by_id[r.transferred_from.as_deref().unwrap()];
            assert_ne!(from.journal_id, r.journal_id);
        }
    }

    #[test]
    fn aggressive_perturbation_is_infeasible() {
        let spec = SynthSpec {
            size: 200,
            perturbation: Perturbation {
                replace_fraction: 0.5,
                delete_fraction: 0.1,
            },
            ..SynthSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::InfeasibleSynth(_))));
    }

    #[test]
    fn inconsistent_rates_are_infeasible() {
        let spec = SynthSpec {
            size: 1000,
            near_duplicate_rate: 0.0,
            ..SynthSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::InfeasibleSynth(_))));
        let spec = SynthSpec {
            near_duplicate_rate: 1.5,
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
    }
}
