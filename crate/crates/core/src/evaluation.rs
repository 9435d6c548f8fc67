//! Classification metrics, ROC and precision-recall curves.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub id: String,
    /// Probability of class good.
    pub score: f64,
    pub predicted: Label,
    pub actual: Label,
}

impl ScoredPrediction {
    /// Predicted label follows the `score ≥ 0.5 ⇒ good` rule.
    pub fn new(id: impl Into<String>, score: f64, actual: Label) -> Self {
        ScoredPrediction {
            id: id.into(),
            score,
            predicted: if score >= 0.5 { Label::Good } else { Label::Bad },
            actual,
        }
    }
}

pub fn write_predictions(preds: &[ScoredPrediction], mut w: impl Write) -> Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions(r: impl BufRead) -> Result<Vec<ScoredPrediction>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: ScoredPrediction =
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("predictions line {}: {e}", i + 1)))?;
        if !(0.0..=1.0).contains(&p.score) {
            return Err(Error::Data(format!("predictions line {}: score {} outside [0, 1]", i + 1, p.score)));
        }
        out.push(p);
    }
    Ok(out)
}

/// Counts with respect to the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub positive: Label,
    pub accuracy: f64,
    /// Macro averages over the two classes.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: f64,
    pub auprc: f64,
    pub confusion: Confusion,
    pub positive_class: ClassMetrics,
    pub negative_class: ClassMetrics,
    /// (false positive rate, true positive rate), from (0,0) to (1,1).
    pub roc_points: Vec<(f64, f64)>,
    /// (recall, precision), starting at (0,1).
    pub pr_points: Vec<(f64, f64)>,
}

pub fn confusion_from(tp: usize, fp: usize, fn_: usize, tn: usize) -> (f64, ClassMetrics, ClassMetrics) {
    let pos = class_metrics(tp, fp, fn_);
    let neg = class_metrics(tn, fn_, fp);
    (ratio(tp + tn, tp + fp + fn_ + tn), pos, neg)
}

/// Ranking score for the positive class.
fn positive_score(p: &ScoredPrediction, positive: Label) -> f64 {
    match positive {
        Label::Good => p.score,
        Label::Bad => 1.0 - p.score,
    }
}

/// AUROC as the normalised Mann-Whitney statistic with mid-ranks for ties.
pub fn auroc_rank(scores: &[f64], is_positive: &[bool]) -> Result<f64> {
    let n_pos = is_positive.iter().filter(|&&b| b).count();
    let n_neg = is_positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("AUROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| is_positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Cumulative (tp, fp) after each distinct threshold, highest score first.
fn threshold_steps(scores: &[f64], is_positive: &[bool]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if is_positive[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = k + 1 == order.len() || scores[order[k + 1]] != scores[i];
        if last_of_group {
            steps.push((tp, fp));
        }
    }
    steps
}

pub fn compute_report(preds: &[ScoredPrediction], positive: Label) -> Result<EvalReport> {
    let is_pos: Vec<bool> = preds.iter().map(|p| p.actual == positive).collect();
    let n_pos = is_pos.iter().filter(|&&b| b).count();
    let n_neg = preds.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data("evaluation needs at least one sample of each class".into()));
    }
    let scores: Vec<f64> = preds.iter().map(|p| positive_score(p, positive)).collect();

    let mut c = Confusion { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for p in preds {
        match (p.predicted == positive, p.actual == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let (accuracy, pos, neg) = confusion_from(c.tp, c.fp, c.fn_, c.tn);

    let steps = threshold_steps(&scores, &is_pos);
    let mut roc_points = vec![(0.0, 0.0)];
    let mut pr_points = vec![(0.0, 1.0)];
    let mut auprc = 0.0;
    let mut prev_recall = 0.0;
    for &(tp, fp) in &steps {
        roc_points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        auprc += (recall - prev_recall) * precision;
        prev_recall = recall;
        pr_points.push((recall, precision));
    }

    Ok(EvalReport {
        n: preds.len(),
        positive,
        accuracy,
        precision: (pos.precision + neg.precision) / 2.0,
        recall: (pos.recall + neg.recall) / 2.0,
        f1: (pos.f1 + neg.f1) / 2.0,
        auroc: auroc_rank(&scores, &is_pos)?,
        auprc,
        confusion: c,
        positive_class: pos,
        negative_class: neg,
        roc_points,
        pr_points,
    })
}

fn write_curve(path: &Path, header: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for (x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes `<name>_roc.csv` (fpr,tpr) and `<name>_pr.csv` (recall,precision) into `dir`.
pub fn export_curves(report: &EvalReport, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    let roc = dir.join(format!("{name}_roc.csv"));
    let pr = dir.join(format!("{name}_pr.csv"));
    write_curve(&roc, "fpr,tpr", &report.roc_points)?;
    write_curve(&pr, "recall,precision", &report.pr_points)?;
    Ok((roc, pr))
}

pub const TABLE_COLUMNS: [&str; 6] = ["Precision", "Recall", "F1", "Accuracy", "AUCROC", "AUPRC"];

/// Markdown comparison table, one row per variant.
pub fn comparison_table(rows: &[(String, EvalReport)]) -> String {
    let mut out = format!("| Model | {} |\n", TABLE_COLUMNS.join(" | "));
    out.push_str(&format!("|---|{}\n", "---:|".repeat(TABLE_COLUMNS.len())));
    for (name, r) in rows {
        let cells = [r.precision, r.recall, r.f1, r.accuracy, r.auroc, r.auprc];
        let cells: Vec<String> = cells.iter().map(|v| format!("{v:.3}")).collect();
        out.push_str(&format!("| {name} | {} |\n", cells.join(" | ")));
    }
    out
}

/// The same table as CSV.
pub fn comparison_csv(rows: &[(String, EvalReport)]) -> String {
    let mut out = format!("model,{}\n", TABLE_COLUMNS.join(","));
    for (name, r) in rows {
        out.push_str(&format!("{name},{},{},{},{},{},{}\n", r.precision, r.recall, r.f1, r.accuracy, r.auroc, r.auprc));
    }
    out
}
