//! Support-weighted classification metrics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Counts with rows as the true class and columns as the prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix(Vec<Vec<u64>>);

impl ConfusionMatrix {
    pub fn new(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Data(format!(
                "{} true labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut m = vec![vec![0u64; classes]; classes];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= classes || p >= classes {
                return Err(Error::Data(format!("class id out of range for {classes} classes")));
            }
            m[t][p] += 1;
        }
        Ok(Self(m))
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.0[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.0[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.0.iter().map(|row| row[class]).sum()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Weighted aggregates plus per-class values. Serialises to the
/// `metrics.json` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub weighted_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let total = confusion.total();
        if total == 0 {
            return Err(Error::Data("no samples to evaluate".into()));
        }
        let per_class: Vec<ClassMetrics> = (0..confusion.classes())
            .map(|c| {
                let tp = confusion.get(c, c);
                let precision = ratio(tp, confusion.predicted(c));
                let recall = ratio(tp, confusion.support(c));
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    class: c,
                    precision,
                    recall,
                    f1,
                    support: confusion.support(c),
                }
            })
            .collect();
        let weighted = |f: fn(&ClassMetrics) -> f64| {
            per_class
                .iter()
                .map(|m| m.support as f64 * f(m))
                .sum::<f64>()
                / total as f64
        };
        Ok(Self {
            weighted_f1: weighted(|m| m.f1),
            weighted_precision: weighted(|m| m.precision),
            weighted_recall: weighted(|m| m.recall),
            per_class,
            confusion,
        })
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.confusion.classes()).map(|c| self.confusion.get(c, c)).sum();
        diag as f64 / self.confusion.total() as f64
    }
}

/// Weighted precision, recall and F1 where each class counts in
/// proportion to its support. Undefined per-class ratios count as zero.
pub fn weighted_metrics(truth: &[usize], pred: &[usize], classes: usize) -> Result<Metrics> {
    if truth.is_empty() {
        return Err(Error::Data("no samples to evaluate".into()));
    }
    Metrics::from_confusion(ConfusionMatrix::new(truth, pred, classes)?)
}
