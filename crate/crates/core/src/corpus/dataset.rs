use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Good, Label::Bad];

    pub fn other(self) -> Label {
        match self {
            Label::Good => Label::Bad,
            Label::Bad => Label::Good,
        }
    }

    /// Class index used by the classifiers: good = 1, bad = 0.
    pub fn class_index(self) -> usize {
        match self {
            Label::Good => 1,
            Label::Bad => 0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Good => "good",
            Label::Bad => "bad",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "good" => Ok(Label::Good),
            "bad" => Ok(Label::Bad),
            other => Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unlabeled,
}

impl Split {
    pub const PARTS: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unlabeled" => Ok(Split::Unlabeled),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSample {
    pub id: String,
    pub name: String,
    pub source: String,
    pub label: Option<Label>,
    pub split: Split,
}

impl MethodSample {
    pub fn new(source: String, name: String, label: Option<Label>, split: Split) -> Self {
        Self {
            id: method_id(&source),
            name,
            source,
            label,
            split,
        }
    }
}

/// Stable id of a method: the first 16 hex digits of the SHA-256 of its source.
pub fn method_id(source: &str) -> String {
    sha256_hex(source.as_bytes())[..16].to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<MethodSample>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids.
    pub fn new(samples: Vec<MethodSample>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Data(format!("duplicate sample id {}", s.id)));
            }
        }
        Ok(Self { samples })
    }

    /// Builds a dataset keeping only the first sample of each id.
    pub fn dedup(samples: Vec<MethodSample>) -> Self {
        let mut seen = HashSet::new();
        let samples = samples
            .into_iter()
            .filter(|s| seen.insert(s.id.clone()))
            .collect();
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of good-labeled samples among labeled ones; `None` without labels.
    pub fn class_ratio(&self) -> Option<f64> {
        let labeled: Vec<Label> = self.samples.iter().filter_map(|s| s.label).collect();
        if labeled.is_empty() {
            return None;
        }
        let good = labeled.iter().filter(|&&l| l == Label::Good).count();
        Some(good as f64 / labeled.len() as f64)
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &MethodSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn subset(&self, split: Split) -> Dataset {
        Dataset {
            samples: self.in_split(split).cloned().collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&MethodSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Order-independent content hash.
    pub fn content_hash(&self) -> String {
        let mut ids: Vec<String> = self
            .samples
            .iter()
            .map(|s| {
                let label = s.label.map(|l| l.to_string()).unwrap_or_default();
                format!("{}:{}:{}", s.id, label, s.split)
            })
            .collect();
        ids.sort();
        sha256_hex(ids.join("\n").as_bytes())[..16].to_string()
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let sample: MethodSample = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("dataset line {}: {e}", i + 1)))?;
            samples.push(sample);
        }
        let dataset = Dataset::new(samples)?;
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut writer, s)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Checks that every sample in train/val/test carries a label.
    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            if s.split != Split::Unlabeled && s.label.is_none() {
                return Err(Error::Data(format!(
                    "sample {} is in split {} but has no label",
                    s.id, s.split
                )));
            }
        }
        Ok(())
    }

    /// Labels samples from expert scores: `score >= threshold` is good.
    /// Samples without a score keep their current label.
    pub fn apply_scores(&mut self, scores: &[ScoreRecord], threshold: f64) {
        let by_id: HashMap<&str, f64> = scores.iter().map(|r| (r.id.as_str(), r.score)).collect();
        for s in &mut self.samples {
            if let Some(&score) = by_id.get(s.id.as_str()) {
                s.label = Some(if score >= threshold { Label::Good } else { Label::Bad });
            }
        }
    }
}

/// One line of the label sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub score: f64,
}

pub fn read_scores(reader: impl BufRead) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("label line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        let parts = r.as_array();
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios must be in [0, 1] and sum to 1, got ({train}, {val}, {test})"
            )));
        }
        Ok(r)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

/// Integer allocation of `total` proportional to `ratios` by largest remainder.
fn largest_remainder(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts = [0usize; 3];
    for j in 0..3 {
        counts[j] = exact[j].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = total - counts.iter().sum::<usize>();
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[j] > 0.0 {
            counts[j] += 1;
            left -= 1;
        }
    }
    counts
}

/// Stratified, seed-deterministic train/val/test assignment of the labeled
/// samples. Unlabeled samples are left untouched.
///
/// Per-class counts come from floors of the exact shares; the leftover units
/// go to the (class, part) cells with the largest fractional parts, subject
/// to the overall part sizes matching a largest-remainder split of the whole
/// labeled set. Within a class, samples are ordered by id and then shuffled,
/// so the assignment does not depend on input order.
pub fn split_dataset(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Dataset> {
    let ratios_arr = ratios.as_array();
    SplitRatios::new(ratios.train, ratios.val, ratios.test)?;
    let parts = ratios_arr.iter().filter(|&&r| r > 0.0).count();

    let mut by_class: Vec<(Label, Vec<usize>)> = Label::ALL
        .iter()
        .map(|&label| {
            let mut idx: Vec<usize> = dataset
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.label == Some(label))
                .map(|(i, _)| i)
                .collect();
            idx.sort_by(|&a, &b| dataset.samples[a].id.cmp(&dataset.samples[b].id));
            (label, idx)
        })
        .filter(|(_, idx)| !idx.is_empty())
        .collect();

    let n_labeled: usize = by_class.iter().map(|(_, idx)| idx.len()).sum();
    if n_labeled < 3 {
        return Err(Error::Data(format!(
            "need at least 3 labeled samples to split, found {n_labeled}"
        )));
    }
    for (label, idx) in &by_class {
        if idx.len() < parts {
            return Err(Error::Data(format!(
                "class {label} has {} samples, fewer than the {parts} split parts",
                idx.len()
            )));
        }
    }

    let column_targets = largest_remainder(n_labeled, &ratios_arr);
    let mut cells: Vec<[usize; 3]> = Vec::new();
    let mut bumped: Vec<[bool; 3]> = vec![[false; 3]; by_class.len()];
    let mut fractions: Vec<(f64, usize, usize)> = Vec::new();
    for (c, (_, idx)) in by_class.iter().enumerate() {
        let mut row = [0usize; 3];
        for j in 0..3 {
            let exact = ratios_arr[j] * idx.len() as f64;
            row[j] = exact.floor() as usize;
            if ratios_arr[j] > 0.0 {
                fractions.push((exact - exact.floor(), c, j));
            }
        }
        cells.push(row);
    }
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let row_deficit = |cells: &Vec<[usize; 3]>, c: usize| by_class[c].1.len() - cells[c].iter().sum::<usize>();
    let col_sum = |cells: &Vec<[usize; 3]>, j: usize| cells.iter().map(|r| r[j]).sum::<usize>();
    for &(_, c, j) in &fractions {
        if row_deficit(&cells, c) > 0 && col_sum(&cells, j) < column_targets[j] {
            cells[c][j] += 1;
            bumped[c][j] = true;
        }
    }
    // Column targets can be unreachable for some rows; finish those rows with
    // the remaining largest fractions, still at most one unit above the floor.
    for &(_, c, j) in &fractions {
        if row_deficit(&cells, c) > 0 && !bumped[c][j] {
            cells[c][j] += 1;
            bumped[c][j] = true;
        }
    }

    let mut out = dataset.clone();
    for (c, (label, idx)) in by_class.iter_mut().enumerate() {
        let class_seed = seed ^ (label.class_index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        idx.shuffle(&mut rng_from_seed(class_seed));
        let mut it = idx.iter();
        for (j, part) in Split::PARTS.iter().enumerate() {
            for &i in it.by_ref().take(cells[c][j]) {
                out.samples[i].split = *part;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(n_good: usize, n_bad: usize) -> Dataset {
        let mut samples = Vec::new();
        for i in 0..n_good + n_bad {
            let label = if i < n_good { Label::Good } else { Label::Bad };
            samples.push(MethodSample::new(
                format!("void m{i}() {{}}"),
                format!("m{i}"),
                Some(label),
                Split::Unlabeled,
            ));
        }
        Dataset::new(samples).unwrap()
    }

    fn count(d: &Dataset, split: Split, label: Label) -> usize {
        d.in_split(split).filter(|s| s.label == Some(label)).count()
    }

    #[test]
    fn stratified_ten_sample_split() {
        let d = labeled(7, 3);
        let s = split_dataset(&d, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), 7).unwrap();
        assert_eq!(s.in_split(Split::Train).count(), 8);
        assert_eq!(s.in_split(Split::Val).count(), 1);
        assert_eq!(s.in_split(Split::Test).count(), 1);
        assert!((5..=6).contains(&count(&s, Split::Train, Label::Good)));
        assert!((2..=3).contains(&count(&s, Split::Train, Label::Bad)));
    }

    #[test]
    fn degenerate_split_puts_everything_in_train() {
        let d = labeled(4, 3);
        let s = split_dataset(&d, SplitRatios::new(1.0, 0.0, 0.0).unwrap(), 1).unwrap();
        assert_eq!(s.in_split(Split::Train).count(), 7);
    }

    #[test]
    fn split_is_seed_deterministic_and_order_independent() {
        let d = labeled(20, 9);
        let r = SplitRatios::default();
        let a = split_dataset(&d, r, 3).unwrap();
        let b = split_dataset(&d, r, 3).unwrap();
        assert_eq!(a, b);
        let mut reversed = d.clone();
        reversed.samples.reverse();
        let c = split_dataset(&reversed, r, 3).unwrap();
        for s in &a.samples {
            assert_eq!(c.get(&s.id).unwrap().split, s.split);
        }
        let other = split_dataset(&d, r, 4).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn too_few_in_a_class_is_an_error() {
        let d = labeled(5, 2);
        assert!(split_dataset(&d, SplitRatios::default(), 1).is_err());
        assert!(split_dataset(&labeled(1, 1), SplitRatios::new(1.0, 0.0, 0.0).unwrap(), 1).is_err());
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(SplitRatios::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitRatios::new(0.5, 0.25, 0.25).is_ok());
    }

    #[test]
    fn unlabeled_samples_keep_their_split() {
        let mut d = labeled(6, 4);
        d.samples.push(MethodSample::new("void u() {}".into(), "u".into(), None, Split::Unlabeled));
        let s = split_dataset(&d, SplitRatios::default(), 9).unwrap();
        assert_eq!(s.get(&method_id("void u() {}")).unwrap().split, Split::Unlabeled);
    }

    #[test]
    fn jsonl_round_trip_and_schema() {
        let d = split_dataset(&labeled(6, 4), SplitRatios::default(), 2).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["id", "name", "source", "label", "split"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert_eq!(Dataset::read_jsonl(&buf[..]).unwrap(), d);
    }

    #[test]
    fn labeled_split_without_label_is_rejected() {
        let line = r#"{"id":"x","name":"f","source":"void f(){}","label":null,"split":"train"}"#;
        assert!(Dataset::read_jsonl(line.as_bytes()).is_err());
    }

    #[test]
    fn score_threshold_labels() {
        let mut d = labeled(0, 0);
        d.samples.push(MethodSample::new("void a(){}".into(), "a".into(), None, Split::Unlabeled));
        d.samples.push(MethodSample::new("void b(){}".into(), "b".into(), None, Split::Unlabeled));
        let scores = read_scores(
            format!(
                "{{\"id\":\"{}\",\"score\":3.5}}\n{{\"id\":\"{}\",\"score\":2}}\n",
                method_id("void a(){}"),
                method_id("void b(){}")
            )
            .as_bytes(),
        )
        .unwrap();
        d.apply_scores(&scores, 3.0);
        assert_eq!(d.samples[0].label, Some(Label::Good));
        assert_eq!(d.samples[1].label, Some(Label::Bad));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_a_partition_within_one_sample(n_good in 3usize..60, n_bad in 3usize..40, seed: u64, t in 0.5f64..0.9) {
                let rest = 1.0 - t;
                let r = SplitRatios::new(t, rest / 2.0, rest / 2.0).unwrap();
                let d = labeled(n_good, n_bad);
                let s = split_dataset(&d, r, seed).unwrap();
                prop_assert!(s.samples.iter().all(|x| x.split != Split::Unlabeled));
                for (label, n) in [(Label::Good, n_good), (Label::Bad, n_bad)] {
                    let counts: Vec<usize> = Split::PARTS.iter().map(|&p| count(&s, p, label)).collect();
                    prop_assert_eq!(counts.iter().sum::<usize>(), n);
                    for (c, ratio) in counts.iter().zip([r.train, r.val, r.test]) {
                        prop_assert!((*c as f64 - ratio * n as f64).abs() <= 1.0 + 1e-9);
                    }
                }
            }
        }
    }
}
