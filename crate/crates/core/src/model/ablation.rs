use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EpiGcnConfig, Variant};
use super::split::DatasetSplit;
use super::train::{evaluate, train};
use crate::autodiff::Tensor;
use crate::mobility::MobilityGraph;
use crate::Result;

/// One row of the ablation report, scored on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub seed: u64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Trains every variant once per seed on the same graph and split. Rows
/// come back ordered by variant, then seed.
pub fn run_ablations(
    graph: &MobilityGraph,
    features: &Tensor,
    labels: &[usize],
    split: &DatasetSplit,
    base: &EpiGcnConfig,
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let jobs: Vec<(Variant, u64)> = Variant::ALL
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(variant, seed)| {
            let config = EpiGcnConfig {
                variant,
                seed,
                ..*base
            };
            let outcome = train(graph, features, labels, split, &config)?;
            let m = evaluate(&outcome.model, graph, features, labels, &split.test)?;
            Ok(AblationRow {
                variant,
                seed,
                f1: m.weighted_f1,
                precision: m.weighted_precision,
                recall: m.weighted_recall,
            })
        })
        .collect()
}

/// Mean test weighted F1 per variant, in [`Variant::ALL`] order.
pub fn mean_f1(rows: &[AblationRow]) -> Vec<(Variant, f64)> {
    Variant::ALL
        .iter()
        .map(|&v| {
            let vals: Vec<f64> = rows.iter().filter(|r| r.variant == v).map(|r| r.f1).collect();
            (v, vals.iter().sum::<f64>() / vals.len().max(1) as f64)
        })
        .collect()
}
