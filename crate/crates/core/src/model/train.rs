use serde::{Deserialize, Serialize};

use super::config::EpiGcnConfig;
use super::network::EpiGcn;
use super::split::DatasetSplit;
use crate::autodiff::{adam_step, AdamConfig, AdamState, Tensor};
use crate::metrics::{weighted_metrics, Metrics};
use crate::mobility::MobilityGraph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_weighted_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EpiGcn,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
}

fn check_labels(graph: &MobilityGraph, labels: &[usize], classes: usize) -> Result<()> {
    if labels.len() != graph.len() {
        return Err(Error::Data(format!(
            "{} labels for {} graph nodes",
            labels.len(),
            graph.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    Ok(())
}

/// Full-batch training on the train indices with Adam.
///
/// Each epoch records the training loss and validation weighted F1 of the
/// parameters going into that epoch's update; the parameters with the best
/// validation F1 (earliest on ties) are returned. Without a validation set
/// the final parameters are returned.
pub fn train(
    graph: &MobilityGraph,
    features: &Tensor,
    labels: &[usize],
    split: &DatasetSplit,
    config: &EpiGcnConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::config("split.train", "training split is empty"));
    }
    split.validate(graph.len())?;
    check_labels(graph, labels, config.num_classes)?;

    let mut model = EpiGcn::new(features.cols(), *config)?;
    let mut weights = vec![0.0; graph.len()];
    for &i in &split.train {
        weights[i] = 1.0;
    }
    let val_truth: Vec<usize> = split.val.iter().map(|&i| labels[i]).collect();
    let adam = AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, EpiGcn)> = None;

    for epoch in 0..config.epochs {
        let (loss, probs, grads) = model.loss_and_grads(graph, features, labels, &weights)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss at epoch {epoch}")));
        }
        let val_f1 = if split.val.is_empty() {
            f64::NAN
        } else {
            let pred = probs.argmax_rows();
            let val_pred: Vec<usize> = split.val.iter().map(|&i| pred[i]).collect();
            let f1 = weighted_metrics(&val_truth, &val_pred, config.num_classes)?.weighted_f1;
            if best.as_ref().is_none_or(|b| f1 > b.0) {
                best = Some((f1, epoch, model.clone()));
            }
            f1
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_weighted_f1: val_f1,
        });
        adam_step(model.params_mut(), &grads, &mut state, &adam)?;
    }

    let (model, best_epoch) = match best {
        Some((_, epoch, m)) => (m, Some(epoch)),
        None => {
            let last = config.epochs.checked_sub(1);
            (model, last)
        }
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

/// Weighted metrics of argmax predictions on `indices`.
pub fn evaluate(
    model: &EpiGcn,
    graph: &MobilityGraph,
    features: &Tensor,
    labels: &[usize],
    indices: &[usize],
) -> Result<Metrics> {
    if indices.is_empty() {
        return Err(Error::Data("no nodes to evaluate".into()));
    }
    check_labels(graph, labels, model.config().num_classes)?;
    if let Some(bad) = indices.iter().find(|&&i| i >= graph.len()) {
        return Err(Error::Data(format!("node index {bad} out of range")));
    }
    let pred = model.forward(graph, features)?.argmax_rows();
    let truth: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();
    let pred: Vec<usize> = indices.iter().map(|&i| pred[i]).collect();
    weighted_metrics(&truth, &pred, model.config().num_classes)
}
