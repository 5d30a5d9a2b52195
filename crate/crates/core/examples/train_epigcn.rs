//! Trains the transmission-aware GCN on a synthetic bundle, then reports
//! test metrics and how S+I+R mass moves through the layers.
//!
//! cargo run --release --example train_epigcn [-- <n_regions> <variant>]

use epirisk::autodiff::Tensor;
use epirisk::model::{evaluate, train, EpiGcnConfig, Variant};
use epirisk::synth::{make_dataset, DatasetRecipe, ScenarioConfig};

fn main() -> epirisk::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_regions = args.next().and_then(|a| a.parse().ok()).unwrap_or(300);
    let variant: Variant = match args.next() {
        Some(v) => v.parse()?,
        None => Variant::Full,
    };
    let data = make_dataset(&DatasetRecipe {
        scenario: ScenarioConfig {
            n_regions,
            ..ScenarioConfig::default()
        },
        ..DatasetRecipe::default()
    })?;
    let features = Tensor::from_rows(&data.regions.iter().map(|r| r.features.clone()).collect::<Vec<_>>())?;
    let labels = data.label_indices();
    let cfg = EpiGcnConfig {
        variant,
        ..EpiGcnConfig::default()
    };

    let out = train(&data.graph, &features, &labels, &data.split, &cfg)?;
    for h in out.history.iter().step_by(50) {
        println!("epoch {:>3}  loss {:.4}  val F1 {:.4}", h.epoch, h.train_loss, h.val_weighted_f1);
    }
    println!("selected epoch {:?}", out.best_epoch);

    let m = evaluate(&out.model, &data.graph, &features, &labels, &data.split.test)?;
    println!("{variant}: test F1 {:.4}  precision {:.4}  recall {:.4}", m.weighted_f1, m.weighted_precision, m.weighted_recall);

    let trace = out.model.compartment_trace(&data.graph, &features)?;
    for (l, [s, i, r]) in trace.iter().enumerate() {
        println!(
            "layer {l}: total S {:.2}  I {:.2}  R {:.2}  (S+I+R {:.6})",
            s.sum(),
            i.sum(),
            r.sum(),
            s.sum() + i.sum() + r.sum()
        );
    }
    Ok(())
}
