//! Gravity-model mobility graph over a handful of towns.
//!
//! cargo run --example mobility_graph

use epirisk::mobility::{build_graph, gravity_weight, GravityConfig, Neighbors, Region};

fn town(id: &str, population: f64, x_km: f64, y_km: f64) -> Region {
    Region {
        id: id.into(),
        population,
        x_m: x_km * 1000.0,
        y_m: y_km * 1000.0,
        features: vec![],
    }
}

fn main() -> epirisk::Result<()> {
    let towns = [
        town("hub", 18_000.0, 0.0, 0.0),
        town("north", 6_000.0, 0.0, 40.0),
        town("east", 9_000.0, 35.0, 5.0),
        town("far", 15_000.0, 220.0, 180.0),
        town("village", 2_100.0, 8.0, -12.0),
    ];
    let cfg = GravityConfig {
        neighbors: Neighbors::TopK(2),
        ..GravityConfig::default()
    };
    println!(
        "hub -> north raw flow {:.1}, north -> hub {:.1}",
        gravity_weight(18_000.0, 6_000.0, towns[0].distance(&towns[1]), &cfg)?,
        gravity_weight(6_000.0, 18_000.0, towns[0].distance(&towns[1]), &cfg)?
    );

    let graph = build_graph(&towns, &cfg)?;
    for (v, dst) in graph.nodes.iter().enumerate() {
        let incoming: Vec<String> = graph
            .in_edges(v)
            .map(|e| format!("{} ({:.3})", graph.nodes[e.src].id, e.norm_weight))
            .collect();
        println!("{:<8} <- {}", dst.id, incoming.join(", "));
    }
    Ok(())
}
