use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default threshold multiplier. For normally distributed R0 the band
/// `mean +/- 0.71 sd` holds about 52% of regions.
pub const DEFAULT_K: f64 = 0.71;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskLevel {
    Low = 0,
    Medium = 1,
    High = 2,
}

impl RiskLevel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(RiskLevel::Low),
            1 => Some(RiskLevel::Medium),
            2 => Some(RiskLevel::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskLabel {
    pub region_id: String,
    pub r0: f64,
    pub label: RiskLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Categorization {
    pub labels: Vec<RiskLevel>,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub lower: f64,
    pub upper: f64,
    /// The spread was zero, so every value was put in the medium band.
    pub degenerate: bool,
}

impl Categorization {
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }
}

/// Three-level split around `mean +/- k * sd`. Values exactly on a
/// threshold are medium.
pub fn categorize_r0(values: &[f64], k: f64) -> Result<Categorization> {
    if values.len() < 2 {
        return Err(Error::Data("need at least two R0 values to categorise".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite R0 value".into()));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::config("k", "must be a finite non-negative number"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std_dev = var.sqrt();
    let (lower, upper) = (mean - k * std_dev, mean + k * std_dev);

    if std_dev == 0.0 {
        return Ok(Categorization {
            labels: vec![RiskLevel::Medium; values.len()],
            mean,
            std_dev,
            lower,
            upper,
            degenerate: true,
        });
    }
    let labels = values
        .iter()
        .map(|&v| {
            if v < lower {
                RiskLevel::Low
            } else if v > upper {
                RiskLevel::High
            } else {
                RiskLevel::Medium
            }
        })
        .collect();
    Ok(Categorization {
        labels,
        mean,
        std_dev,
        lower,
        upper,
        degenerate: false,
    })
}

/// Pairs region ids with their R0 and risk level.
pub fn label_regions<S: AsRef<str>>(ids: &[S], r0: &[f64], k: f64) -> Result<(Vec<RiskLabel>, Categorization)> {
    if ids.len() != r0.len() {
        return Err(Error::Data(format!("{} ids but {} R0 values", ids.len(), r0.len())));
    }
    let cat = categorize_r0(r0, k)?;
    let labels = ids
        .iter()
        .zip(r0)
        .zip(&cat.labels)
        .map(|((id, &r0), &label)| RiskLabel {
            region_id: id.as_ref().to_string(),
            r0,
            label,
        })
        .collect();
    Ok((labels, cat))
}
