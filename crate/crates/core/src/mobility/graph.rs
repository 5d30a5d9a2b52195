use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One census unit: population, projected position and feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub population: f64,
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<f64>,
}

impl Region {
    pub fn distance(&self, other: &Region) -> f64 {
        (self.x_m - other.x_m).hypot(self.y_m - other.y_m)
    }
}

/// How many in-neighbours each node keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighbors {
    Full,
    TopK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GravityConfig {
    /// Exponent on the origin population.
    pub rho: f64,
    /// Exponent on the destination population.
    pub theta: f64,
    /// Distance decay scale in metres.
    pub delta: f64,
    pub neighbors: Neighbors,
}

impl Default for GravityConfig {
    fn default() -> Self {
        Self {
            rho: 0.46,
            theta: 0.64,
            delta: 82_000.0,
            neighbors: Neighbors::TopK(16),
        }
    }
}

impl GravityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::config("gravity.delta", "must be positive"));
        }
        if !self.rho.is_finite() {
            return Err(Error::config("gravity.rho", "must be finite"));
        }
        if !self.theta.is_finite() {
            return Err(Error::config("gravity.theta", "must be finite"));
        }
        if self.neighbors == Neighbors::TopK(0) {
            return Err(Error::config("gravity.neighbors", "top_k must be at least 1"));
        }
        Ok(())
    }
}

/// Flow from a region of population `n_v` to one of population `n_w` at
/// distance `d`: `n_v^rho * n_w^theta / exp(d / delta)`.
pub fn gravity_weight(n_v: f64, n_w: f64, d: f64, cfg: &GravityConfig) -> Result<f64> {
    if !(n_v > 0.0 && n_w > 0.0) {
        return Err(Error::config("population", "gravity weight needs positive populations"));
    }
    if !(d >= 0.0) {
        return Err(Error::config("distance", "must be non-negative"));
    }
    if !(cfg.delta > 0.0) {
        return Err(Error::config("gravity.delta", "must be positive"));
    }
    Ok(n_v.powf(cfg.rho) * n_w.powf(cfg.theta) / (d / cfg.delta).exp())
}

/// Directed edge `src -> dst`; `norm_weight` sums to one over each node's
/// in-edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub raw_weight: f64,
    pub norm_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityGraph {
    pub config: GravityConfig,
    pub nodes: Vec<Region>,
    /// Sorted by destination, then by descending raw weight.
    pub edges: Vec<Edge>,
    #[serde(skip)]
    in_edges: Vec<Vec<usize>>,
}

impl MobilityGraph {
    pub fn from_parts(config: GravityConfig, nodes: Vec<Region>, edges: Vec<Edge>) -> Result<Self> {
        let n = nodes.len();
        if let Some(e) = edges.iter().find(|e| e.src >= n || e.dst >= n) {
            return Err(Error::Graph(format!("edge {} -> {} out of range for {n} nodes", e.src, e.dst)));
        }
        let mut g = Self {
            config,
            nodes,
            edges,
            in_edges: Vec::new(),
        };
        g.reindex();
        Ok(g)
    }

    fn reindex(&mut self) {
        let mut in_edges = vec![Vec::new(); self.nodes.len()];
        for (k, e) in self.edges.iter().enumerate() {
            in_edges[e.dst].push(k);
        }
        self.in_edges = in_edges;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Edges ending at `node`.
    pub fn in_edges(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.in_edges[node].iter().map(move |&k| &self.edges[k])
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_edges[node].len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|r| r.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: MobilityGraph = serde_json::from_str(s)?;
        Self::from_parts(g.config, g.nodes, g.edges)
    }
}

/// Builds the graph: for each destination the strongest sources by gravity
/// flow (ties by ascending id) become in-edges, then their weights are
/// normalised to sum to one.
pub fn build_graph(regions: &[Region], cfg: &GravityConfig) -> Result<MobilityGraph> {
    cfg.validate()?;
    if regions.len() < 2 {
        return Err(Error::Data("a mobility graph needs at least two regions".into()));
    }
    let mut seen = HashSet::new();
    for r in regions {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Data(format!("duplicate region id `{}`", r.id)));
        }
        if !(r.population > 0.0 && r.population.is_finite()) {
            return Err(Error::Data(format!("region `{}` has non-positive population", r.id)));
        }
        if !(r.x_m.is_finite() && r.y_m.is_finite()) {
            return Err(Error::Data(format!("region `{}` has non-finite coordinates", r.id)));
        }
    }

    let mut edges = Vec::new();
    for (v, dst) in regions.iter().enumerate() {
        let mut candidates = Vec::with_capacity(regions.len() - 1);
        for (w, src) in regions.iter().enumerate() {
            if w == v {
                continue;
            }
            let raw = gravity_weight(src.population, dst.population, src.distance(dst), cfg)?;
            // Weights that underflow carry no flow.
            if raw > 0.0 && raw.is_finite() {
                candidates.push((w, raw));
            }
        }
        candidates.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => regions[a.0].id.cmp(&regions[b.0].id),
            other => other,
        });
        if let Neighbors::TopK(k) = cfg.neighbors {
            candidates.truncate(k);
        }
        let total: f64 = candidates.iter().map(|c| c.1).sum();
        edges.extend(candidates.into_iter().map(|(w, raw)| Edge {
            src: w,
            dst: v,
            raw_weight: raw,
            norm_weight: raw / total,
        }));
    }
    MobilityGraph::from_parts(*cfg, regions.to_vec(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn region(id: &str, population: f64, x: f64, y: f64) -> Region {
        Region {
            id: id.into(),
            population,
            x_m: x,
            y_m: y,
            features: vec![],
        }
    }

    fn cfg(rho: f64, theta: f64, delta: f64, neighbors: Neighbors) -> GravityConfig {
        GravityConfig {
            rho,
            theta,
            delta,
            neighbors,
        }
    }

    #[test]
    fn unit_populations_at_zero_distance() {
        let c = cfg(0.3, 1.7, 10.0, Neighbors::Full);
        assert_eq!(gravity_weight(1.0, 1.0, 0.0, &c).unwrap(), 1.0);
    }

    #[test]
    fn direct_substitution() {
        let c = cfg(1.0, 1.0, 500.0, Neighbors::Full);
        let w = gravity_weight(100.0, 100.0, 500.0, &c).unwrap();
        assert!((w - 10_000.0 / std::f64::consts::E).abs() < 1e-9);
        assert!((w - 3678.794_411_714_423).abs() < 1e-9);
    }

    #[test]
    fn decreasing_in_distance() {
        let c = GravityConfig::default();
        let ws: Vec<f64> = (0..20)
            .map(|k| gravity_weight(5000.0, 8000.0, k as f64 * 5000.0, &c).unwrap())
            .collect();
        assert!(ws.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn invalid_inputs() {
        let c = GravityConfig::default();
        assert!(gravity_weight(0.0, 1.0, 1.0, &c).is_err());
        assert!(gravity_weight(1.0, 1.0, -1.0, &c).is_err());
        let bad = GravityConfig {
            delta: 0.0,
            ..c
        };
        assert!(build_graph(&[region("a", 1.0, 0.0, 0.0), region("b", 1.0, 1.0, 0.0)], &bad).is_err());
    }

    #[test]
    fn two_regions_full() {
        let g = build_graph(
            &[region("a", 100.0, 0.0, 0.0), region("b", 300.0, 1000.0, 0.0)],
            &cfg(0.46, 0.64, 82_000.0, Neighbors::Full),
        )
        .unwrap();
        assert_eq!(g.edges.len(), 2);
        assert!(g.edges.iter().all(|e| e.norm_weight == 1.0 && e.src != e.dst));
    }

    #[test]
    fn collinear_symmetry() {
        let regions = [
            region("a", 1000.0, 0.0, 0.0),
            region("b", 1000.0, 1000.0, 0.0),
            region("c", 1000.0, 2000.0, 0.0),
        ];
        let g = build_graph(&regions, &cfg(1.0, 1.0, 82_000.0, Neighbors::Full)).unwrap();
        let middle: Vec<f64> = g.in_edges(1).map(|e| e.norm_weight).collect();
        assert_eq!(middle, vec![0.5, 0.5]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let regions = [region("a", 1.0, 0.0, 0.0), region("a", 1.0, 1.0, 0.0)];
        assert!(matches!(
            build_graph(&regions, &GravityConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn ties_broken_by_id() {
        // Four equidistant sources around the origin with equal populations.
        let regions = [
            region("o", 100.0, 0.0, 0.0),
            region("d", 100.0, 1.0, 0.0),
            region("b", 100.0, -1.0, 0.0),
            region("c", 100.0, 0.0, 1.0),
            region("a", 100.0, 0.0, -1.0),
        ];
        let g = build_graph(&regions, &cfg(0.5, 0.5, 10.0, Neighbors::TopK(2))).unwrap();
        let ids: Vec<&str> = g.in_edges(0).map(|e| g.nodes[e.src].id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn json_round_trip() {
        let regions = [
            region("a", 1234.5, 0.1, 0.2),
            region("b", 999.0, 3000.3, -10.0),
            region("c", 20000.0, 50.0, 7777.7),
        ];
        let g = build_graph(&regions, &GravityConfig::default()).unwrap();
        let back = MobilityGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.in_degree(2), 2);
    }

    fn arb_regions() -> impl Strategy<Value = Vec<Region>> {
        prop::collection::vec((100.0f64..50_000.0, 0.0f64..100_000.0, 0.0f64..100_000.0), 3..12).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(k, (p, x, y))| region(&format!("r{k:02}"), p, x, y))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn population_scaling_preserves_norm_weights(regions in arb_regions(), c in 0.1f64..10.0) {
            let cfg = GravityConfig { neighbors: Neighbors::Full, ..GravityConfig::default() };
            let g = build_graph(&regions, &cfg).unwrap();
            let scaled: Vec<Region> = regions.iter().map(|r| Region { population: r.population * c, ..r.clone() }).collect();
            let h = build_graph(&scaled, &cfg).unwrap();
            let factor = c.powf(cfg.rho + cfg.theta);
            for (a, b) in g.edges.iter().zip(&h.edges) {
                prop_assert_eq!((a.src, a.dst), (b.src, b.dst));
                prop_assert!((b.raw_weight - factor * a.raw_weight).abs() <= 1e-10 * b.raw_weight);
                prop_assert!((a.norm_weight - b.norm_weight).abs() <= 1e-12);
            }
        }

        #[test]
        fn symmetric_exponents_give_symmetric_weights(a in 1.0f64..1e5, b in 1.0f64..1e5, d in 0.0f64..1e5, e in 0.0f64..2.0) {
            let cfg = cfg(e, e, 82_000.0, Neighbors::Full);
            let ab = gravity_weight(a, b, d, &cfg).unwrap();
            let ba = gravity_weight(b, a, d, &cfg).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-14 * ab);
        }

        #[test]
        fn deterministic_and_normalised(regions in arb_regions(), k in 1usize..5) {
            let cfg = GravityConfig { neighbors: Neighbors::TopK(k), ..GravityConfig::default() };
            let g = build_graph(&regions, &cfg).unwrap();
            prop_assert_eq!(&g, &build_graph(&regions, &cfg).unwrap());
            for v in 0..g.len() {
                prop_assert_eq!(g.in_degree(v), k.min(regions.len() - 1));
                let s: f64 = g.in_edges(v).map(|e| e.norm_weight).sum();
                prop_assert!((s - 1.0).abs() <= 1e-9);
                prop_assert!(g.in_edges(v).all(|e| e.src != v && e.raw_weight > 0.0));
            }
        }
    }

    #[test]
    fn asymmetric_exponents_break_symmetry() {
        let c = GravityConfig::default();
        let ab = gravity_weight(1000.0, 5000.0, 10.0, &c).unwrap();
        let ba = gravity_weight(5000.0, 1000.0, 10.0, &c).unwrap();
        assert_ne!(ab, ba);
    }
}
