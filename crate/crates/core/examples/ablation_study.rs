//! Trains the full model and both ablations on one coupled synthetic
//! bundle and prints the per-seed test metrics.
//!
//! cargo run --release --example ablation_study [-- <n_regions> <seeds>]

use std::time::Instant;

use epirisk::autodiff::Tensor;
use epirisk::model::{mean_f1, run_ablations, EpiGcnConfig};
use epirisk::synth::{make_dataset, DatasetRecipe, ScenarioConfig};

fn main() -> epirisk::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_regions = args.next().and_then(|a| a.parse().ok()).unwrap_or(600);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);

    let recipe = DatasetRecipe {
        scenario: ScenarioConfig {
            n_regions,
            ..ScenarioConfig::default()
        },
        ..DatasetRecipe::default()
    };
    let t = Instant::now();
    let data = make_dataset(&recipe)?;
    let counts = data.categorization.counts();
    println!(
        "bundle: {} regions, {} edges, labels low/medium/high = {:?} ({:.1?})",
        data.regions.len(),
        data.graph.edges.len(),
        counts,
        t.elapsed()
    );

    let rows: Vec<Vec<f64>> = data.regions.iter().map(|r| r.features.clone()).collect();
    let features = Tensor::from_rows(&rows)?;
    let labels = data.label_indices();
    let seeds: Vec<u64> = (0..seeds).collect();
    let t = Instant::now();
    let report = run_ablations(
        &data.graph,
        &features,
        &labels,
        &data.split,
        &EpiGcnConfig::default(),
        &seeds,
    )?;
    println!("{:<12} {:>4} {:>8} {:>9} {:>8}", "variant", "seed", "f1", "precision", "recall");
    for r in &report {
        println!(
            "{:<12} {:>4} {:>8.4} {:>9.4} {:>8.4}",
            r.variant.as_str(),
            r.seed,
            r.f1,
            r.precision,
            r.recall
        );
    }
    for (v, f1) in mean_f1(&report) {
        println!("mean f1 {:<12} {f1:.4}", v.as_str());
    }
    println!("trained in {:.1?}", t.elapsed());
    Ok(())
}
