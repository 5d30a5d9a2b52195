//! Compares reverse-mode gradients of the full network against central
//! finite differences, parameter by parameter.
//!
//! cargo run --release --example gradient_check

use epirisk::autodiff::Tensor;
use epirisk::mobility::{build_graph, GravityConfig, Neighbors, Region};
use epirisk::model::{EpiGcn, EpiGcnConfig};

fn main() -> epirisk::Result<()> {
    let n = 10;
    let regions: Vec<Region> = (0..n)
        .map(|k| Region {
            id: format!("n{k}"),
            population: 3000.0 + 1500.0 * k as f64,
            x_m: 9000.0 * (k as f64).cos() * k as f64,
            y_m: 7000.0 * (k as f64).sin() * k as f64,
            features: vec![],
        })
        .collect();
    let graph = build_graph(
        &regions,
        &GravityConfig {
            neighbors: Neighbors::TopK(3),
            ..GravityConfig::default()
        },
    )?;
    let x = Tensor::from_vec(n, 6, (0..n * 6).map(|j| ((j * 37 % 11) as f64 - 5.0) / 5.0).collect())?;
    let labels: Vec<usize> = (0..n).map(|k| k % 3).collect();
    let weights = vec![1.0; n];

    let model = EpiGcn::new(6, EpiGcnConfig { hidden_dim: 8, seed: 1, ..EpiGcnConfig::default() })?;
    let (loss, _, grads) = model.loss_and_grads(&graph, &x, &labels, &weights)?;
    println!("loss {loss:.6}, {} parameters", model.parameter_count());

    let h = 1e-5;
    let mut probe = model.clone();
    for (name, g) in &grads {
        let mut worst = 0.0f64;
        for j in 0..g.data().len() {
            let orig = model.params().get(name).map_or(0.0, |t| t.data()[j]);
            let mut at = |v: f64| -> epirisk::Result<f64> {
                if let Some(t) = probe.params_mut().get_mut(name) {
                    t.data_mut()[j] = v;
                }
                Ok(probe.loss_and_grads(&graph, &x, &labels, &weights)?.0)
            };
            let numeric = (at(orig + h)? - at(orig - h)?) / (2.0 * h);
            at(orig)?;
            let a = g.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!("{name:<18} {:>4} entries  max rel err {worst:.2e}", g.data().len());
    }
    Ok(())
}
