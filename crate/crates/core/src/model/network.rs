use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{EpiGcnConfig, Variant};
use crate::autodiff::{Checkpoint, NeighborEdge, Params, Tape, Tensor, Var};
use crate::mobility::MobilityGraph;
use crate::{Error, Result};

/// Edge list fed to message passing for `variant`.
///
/// `Full` uses the gravity-normalised weights, `NoGravity` spreads weight
/// evenly over the same in-neighbours, and `VanillaMp` averages over the
/// in-neighbours plus the node itself.
pub fn message_edges(graph: &MobilityGraph, variant: Variant) -> Vec<NeighborEdge> {
    let mut out = Vec::with_capacity(graph.edges.len() + graph.len());
    for v in 0..graph.len() {
        let deg = graph.in_degree(v);
        match variant {
            Variant::Full => out.extend(graph.in_edges(v).map(|e| NeighborEdge {
                src: e.src,
                dst: v,
                weight: e.norm_weight,
            })),
            Variant::NoGravity => out.extend(graph.in_edges(v).map(|e| NeighborEdge {
                src: e.src,
                dst: v,
                weight: 1.0 / deg as f64,
            })),
            Variant::VanillaMp => {
                let w = 1.0 / (deg + 1) as f64;
                out.push(NeighborEdge { src: v, dst: v, weight: w });
                out.extend(graph.in_edges(v).map(|e| NeighborEdge {
                    src: e.src,
                    dst: v,
                    weight: w,
                }));
            }
        }
    }
    out
}

/// Affine map followed by ReLU.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub weight: Var,
    pub bias: Var,
}

/// Susceptible, infectious and recovered embeddings, each `[n, D]`.
#[derive(Debug, Clone, Copy)]
pub struct Compartments {
    pub s: Var,
    pub i: Var,
    pub r: Var,
}

/// `S = relu(h W_S + b_S)` and likewise for `I` and `R`.
pub fn sir_project(tape: &mut Tape, h: Var, proj: [Projection; 3]) -> Result<Compartments> {
    let mut out = [h; 3];
    for (slot, p) in out.iter_mut().zip(proj) {
        let z = tape.linear(h, p.weight, Some(p.bias))?;
        *slot = tape.relu(z);
    }
    Ok(Compartments {
        s: out[0],
        i: out[1],
        r: out[2],
    })
}

/// One transmission / recovery layer. Every right-hand side reads the
/// pre-update embeddings:
///
/// ```text
/// m   = [S | sum_w e_wv I_w] W_tran
/// rec = I W_recov
/// S'  = S - m,  I' = I + m - rec,  R' = R + rec
/// ```
pub fn sir_message_pass(
    tape: &mut Tape,
    c: Compartments,
    edges: &[NeighborEdge],
    w_tran: Var,
    w_recov: Var,
) -> Result<Compartments> {
    let imported = tape.weighted_neighbor_sum(c.i, edges)?;
    let contact = tape.concat_cols(c.s, imported)?;
    let m = tape.linear(contact, w_tran, None)?;
    let rec = tape.linear(c.i, w_recov, None)?;
    let s = tape.sub(c.s, m)?;
    let gained = tape.add(c.i, m)?;
    let i = tape.sub(gained, rec)?;
    let r = tape.add(c.r, rec)?;
    Ok(Compartments { s, i, r })
}

/// Configuration persisted alongside the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    feature_dim: usize,
    config: EpiGcnConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpiGcn {
    config: EpiGcnConfig,
    feature_dim: usize,
    params: Params,
}

pub(crate) struct Recorded {
    pub probs: Var,
    pub params: BTreeMap<String, Var>,
    pub layers: Vec<Compartments>,
}

impl EpiGcn {
    /// Fresh model with Glorot-uniform weights and zero biases, drawn from
    /// `config.seed`.
    pub fn new(feature_dim: usize, config: EpiGcnConfig) -> Result<Self> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(Error::config("feature_dim", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Params::new();
        for (name, rows, cols) in Self::layout(feature_dim, &config) {
            let t = if name.ends_with(".bias") {
                Tensor::zeros(rows, cols)
            } else {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                let data = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
                Tensor::from_vec(rows, cols, data)?
            };
            params.insert(name, t);
        }
        Ok(Self {
            config,
            feature_dim,
            params,
        })
    }

    /// Parameter names and shapes in initialisation order.
    fn layout(f: usize, cfg: &EpiGcnConfig) -> Vec<(String, usize, usize)> {
        let (d, c) = (cfg.hidden_dim, cfg.num_classes);
        let mut out = Vec::new();
        match cfg.variant {
            Variant::Full | Variant::NoGravity => {
                for comp in ["s", "i", "r"] {
                    out.push((format!("proj_{comp}.weight"), f, d));
                    out.push((format!("proj_{comp}.bias"), 1, d));
                }
                for l in 0..cfg.num_layers {
                    out.push((format!("layer{l}.w_tran"), 2 * d, d));
                    out.push((format!("layer{l}.w_recov"), d, d));
                }
                out.push(("output.weight".into(), 3 * d, c));
            }
            Variant::VanillaMp => {
                out.push(("input.weight".into(), f, d));
                out.push(("input.bias".into(), 1, d));
                for l in 0..cfg.num_layers {
                    out.push((format!("layer{l}.weight"), d, d));
                    out.push((format!("layer{l}.bias"), 1, d));
                }
                out.push(("output.weight".into(), d, c));
            }
        }
        out
    }

    pub fn config(&self) -> &EpiGcnConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    fn check_inputs(&self, graph: &MobilityGraph, features: &Tensor) -> Result<()> {
        if features.cols() != self.feature_dim {
            return Err(Error::Shape {
                op: "features",
                left: features.shape(),
                right: (graph.len(), self.feature_dim),
            });
        }
        if features.rows() != graph.len() {
            return Err(Error::Shape {
                op: "graph/features",
                left: features.shape(),
                right: (graph.len(), self.feature_dim),
            });
        }
        Ok(())
    }

    pub(crate) fn record(&self, tape: &mut Tape, graph: &MobilityGraph, features: &Tensor) -> Result<Recorded> {
        self.check_inputs(graph, features)?;
        let params: BTreeMap<String, Var> = self
            .params
            .iter()
            .map(|(name, t)| (name.clone(), tape.param(t.clone())))
            .collect();
        let p = |name: &str| params[name];
        let h = tape.constant(features.clone());
        let edges = message_edges(graph, self.config.variant);
        let mut layers = Vec::new();

        let head_input = match self.config.variant {
            Variant::Full | Variant::NoGravity => {
                let proj = ["s", "i", "r"].map(|c| Projection {
                    weight: p(&format!("proj_{c}.weight")),
                    bias: p(&format!("proj_{c}.bias")),
                });
                let mut state = sir_project(tape, h, proj)?;
                layers.push(state);
                for l in 0..self.config.num_layers {
                    state = sir_message_pass(
                        tape,
                        state,
                        &edges,
                        p(&format!("layer{l}.w_tran")),
                        p(&format!("layer{l}.w_recov")),
                    )?;
                    layers.push(state);
                }
                let si = tape.concat_cols(state.s, state.i)?;
                tape.concat_cols(si, state.r)?
            }
            Variant::VanillaMp => {
                let z = tape.linear(h, p("input.weight"), Some(p("input.bias")))?;
                let mut x = tape.relu(z);
                for l in 0..self.config.num_layers {
                    let agg = tape.weighted_neighbor_sum(x, &edges)?;
                    let z = tape.linear(agg, p(&format!("layer{l}.weight")), Some(p(&format!("layer{l}.bias"))))?;
                    x = tape.relu(z);
                }
                x
            }
        };
        let logits = tape.linear(head_input, p("output.weight"), None)?;
        let probs = tape.softmax_rows(logits);
        Ok(Recorded { probs, params, layers })
    }

    /// Per-node class probabilities, `[n, C]`.
    pub fn forward(&self, graph: &MobilityGraph, features: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, graph, features)?;
        Ok(tape.value(rec.probs).clone())
    }

    /// `(S, I, R)` after projection and after each message-passing layer.
    /// Empty for the vanilla variant.
    pub fn compartment_trace(&self, graph: &MobilityGraph, features: &Tensor) -> Result<Vec<[Tensor; 3]>> {
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, graph, features)?;
        Ok(rec
            .layers
            .iter()
            .map(|c| [c.s, c.i, c.r].map(|v| tape.value(v).clone()))
            .collect())
    }

    /// Weighted cross-entropy and its gradient for every parameter.
    pub fn loss_and_grads(
        &self,
        graph: &MobilityGraph,
        features: &Tensor,
        labels: &[usize],
        weights: &[f64],
    ) -> Result<(f64, Tensor, BTreeMap<String, Tensor>)> {
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, graph, features)?;
        let loss = tape.cross_entropy(rec.probs, labels, weights)?;
        let value = tape.value(loss).item();
        let probs = tape.value(rec.probs).clone();
        let mut grads = tape.backward(loss)?;
        let named = rec
            .params
            .iter()
            .map(|(name, v)| {
                let g = grads.take(*v).unwrap_or_else(|| {
                    let (r, c) = self.params.get(name).expect("param").shape();
                    Tensor::zeros(r, c)
                });
                (name.clone(), g)
            })
            .collect();
        Ok((value, probs, named))
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = serde_json::to_value(ModelMeta {
            feature_dim: self.feature_dim,
            config: self.config,
        })?;
        Ok(Checkpoint::from_params(&self.params, meta))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: ModelMeta = serde_json::from_value(ck.meta.clone())?;
        let mut model = Self::new(meta.feature_dim, meta.config)?;
        model.params = ck.load_into(&model.params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{build_graph, GravityConfig, Neighbors, Region};

    fn toy_graph(n: usize, seed: u64) -> (MobilityGraph, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let regions: Vec<Region> = (0..n)
            .map(|k| Region {
                id: format!("r{k}"),
                population: rng.random_range(2000.0..20000.0),
                x_m: rng.random_range(0.0..50_000.0),
                y_m: rng.random_range(0.0..50_000.0),
                features: vec![],
            })
            .collect();
        let cfg = GravityConfig {
            neighbors: Neighbors::TopK(3),
            ..GravityConfig::default()
        };
        let g = build_graph(&regions, &cfg).unwrap();
        let f = Tensor::from_vec(n, 5, (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        (g, f)
    }

    fn cfg(variant: Variant) -> EpiGcnConfig {
        EpiGcnConfig {
            hidden_dim: 4,
            variant,
            ..EpiGcnConfig::default()
        }
    }

    #[test]
    fn parameter_count_formula() {
        let (f, d, l, c) = (6, 8, 2, 3);
        let config = EpiGcnConfig {
            hidden_dim: d,
            num_layers: l,
            num_classes: c,
            ..EpiGcnConfig::default()
        };
        let m = EpiGcn::new(f, config).unwrap();
        assert_eq!(m.parameter_count(), 3 * (f * d + d) + l * (2 * d * d + d * d) + 3 * d * c);
        let ng = EpiGcn::new(f, EpiGcnConfig { variant: Variant::NoGravity, ..config }).unwrap();
        assert_eq!(ng.parameter_count(), m.parameter_count());
    }

    #[test]
    fn zero_inputs_project_to_zero() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::zeros(3, 4));
        let proj = [0.3, -0.7, 1.1].map(|s| Projection {
            weight: tape.param(Tensor::from_vec(4, 2, vec![s; 8]).unwrap()),
            bias: tape.param(Tensor::zeros(1, 2)),
        });
        let c = sir_project(&mut tape, h, proj).unwrap();
        for v in [c.s, c.i, c.r] {
            assert!(tape.value(v).data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn projections_are_non_negative_and_distinct() {
        let (g, f) = toy_graph(6, 2);
        let m = EpiGcn::new(5, cfg(Variant::Full)).unwrap();
        let trace = m.compartment_trace(&g, &f).unwrap();
        let [s, i, r] = &trace[0];
        for t in [s, i, r] {
            assert!(t.data().iter().all(|&x| x >= 0.0));
        }
        assert_ne!(s, i);
    }

    #[test]
    fn isolated_node_uses_only_local_state() {
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![0.5, 0.5]]).unwrap());
        let i = tape.constant(Tensor::from_rows(&[vec![3.0, 1.0], vec![2.0, 0.0]]).unwrap());
        let r = tape.constant(Tensor::zeros(2, 2));
        let w_tran = tape.constant(Tensor::from_vec(4, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap());
        let w_recov = tape.constant(Tensor::identity(2));
        // Only node 1 receives a message.
        let edges = [NeighborEdge { src: 0, dst: 1, weight: 1.0 }];
        let out = sir_message_pass(&mut tape, Compartments { s, i, r }, &edges, w_tran, w_recov).unwrap();
        // node 0: m = [1,2,0,0] W_tran = [0.7, 1.0]
        assert_eq!(tape.value(out.s).row(0), &[1.0 - 0.7, 2.0 - 1.0]);
        assert_eq!(tape.value(out.r).row(0), &[3.0, 1.0]);
    }

    #[test]
    fn vanilla_edges_include_self() {
        let (g, _) = toy_graph(5, 9);
        let e = message_edges(&g, Variant::VanillaMp);
        assert_eq!(e.len(), g.edges.len() + 5);
        for v in 0..5 {
            let total: f64 = e.iter().filter(|x| x.dst == v).map(|x| x.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let (g, f) = toy_graph(5, 1);
        let m = EpiGcn::new(4, cfg(Variant::Full)).unwrap();
        assert!(matches!(m.forward(&g, &f), Err(Error::Shape { .. })));
        let m = EpiGcn::new(5, cfg(Variant::Full)).unwrap();
        assert!(m.forward(&g, &Tensor::zeros(4, 5)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = EpiGcn::new(5, cfg(Variant::VanillaMp)).unwrap();
        let json = m.to_checkpoint().unwrap().to_json().unwrap();
        let back = EpiGcn::from_checkpoint(&Checkpoint::from_json(&json).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
