#![allow(dead_code)]

use epirisk::autodiff::Tensor;
use epirisk::mobility::{build_graph, GravityConfig, MobilityGraph, Neighbors, Region};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_regions(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Region> {
    (0..n)
        .map(|k| Region {
            id: format!("r{k:03}"),
            population: rng.random_range(2000.0..20000.0),
            x_m: rng.random_range(0.0..extent),
            y_m: rng.random_range(0.0..extent),
            features: vec![],
        })
        .collect()
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize, f: usize) -> Tensor {
    let data = (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(n, f, data).unwrap()
}

/// Random graph with `k` in-neighbours per node.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, k: usize) -> MobilityGraph {
    let regions = random_regions(rng, n, 200_000.0);
    let cfg = GravityConfig {
        neighbors: Neighbors::TopK(k),
        ..GravityConfig::default()
    };
    build_graph(&regions, &cfg).unwrap()
}
