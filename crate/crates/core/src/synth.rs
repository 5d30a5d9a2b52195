//! Seeded synthetic scenarios with known epidemiological ground truth.
//!
//! Regions get a true `(beta, gamma)`; their features are a noisy encoding
//! of `(ln beta, ln gamma, ln population)`, so labels are learnable. Case
//! curves come from a metapopulation SIR in which a fraction of each
//! region's force of infection is imported from its gravity neighbours.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mobility::{build_graph, GravityConfig, MobilityGraph, Region};
use crate::model::DatasetSplit;
use crate::sir::{
    calibrate_sir, label_regions, rk4_step, steps_for, transmission, CalibConfig, Calibration, CaseSeries,
    Categorization, RiskLabel,
};
use crate::{Error, Result};

pub const POPULATION_RANGE: (f64, f64) = (2000.0, 20000.0);

// Independent random streams drawn from one seed.
const STREAM_REGIONS: u64 = 1;
const STREAM_CASE_NOISE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_regions: usize,
    pub feature_dim: usize,
    pub seed: u64,
    pub beta_range: (f64, f64),
    pub gamma_range: (f64, f64),
    /// Fraction of the force of infection imported from neighbours.
    pub coupling: f64,
    /// Standard deviation of the log-normal multiplicative case noise.
    pub noise: f64,
    /// Standard deviation of the Gaussian noise added to feature encodings.
    pub feature_noise: f64,
    pub horizon_days: u32,
    pub initial_infected: f64,
    /// Side of the square that region centroids are drawn from.
    pub extent_m: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_regions: 600,
            feature_dim: 16,
            seed: 7,
            beta_range: (0.15, 0.45),
            gamma_range: (0.08, 0.2),
            coupling: 0.4,
            noise: 0.05,
            feature_noise: 0.1,
            horizon_days: 120,
            initial_infected: 10.0,
            extent_m: 2_000_000.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_regions < 4 {
            return Err(Error::config("scenario.n_regions", "need at least 4 regions"));
        }
        if self.feature_dim < 3 {
            return Err(Error::config("scenario.feature_dim", "need at least 3 feature dimensions"));
        }
        for (name, (lo, hi)) in [
            ("scenario.beta_range", self.beta_range),
            ("scenario.gamma_range", self.gamma_range),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(name, "need 0 < lower <= upper"));
            }
        }
        if !(0.0..1.0).contains(&self.coupling) {
            return Err(Error::config("scenario.coupling", "must lie in [0, 1)"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("scenario.noise", "must be non-negative"));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::config("scenario.feature_noise", "must be non-negative"));
        }
        if self.horizon_days < 7 {
            return Err(Error::config("scenario.horizon_days", "need at least 7 days"));
        }
        if !(self.initial_infected >= 0.0 && self.initial_infected < POPULATION_RANGE.0) {
            return Err(Error::config("scenario.initial_infected", "must be in [0, 2000)"));
        }
        if !(self.extent_m > 0.0) {
            return Err(Error::config("scenario.extent_m", "must be positive"));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Hidden epidemiological parameters of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionTruth {
    pub beta: f64,
    pub gamma: f64,
    pub initial_infected: f64,
}

impl RegionTruth {
    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }
}

fn log_unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi == lo {
        0.0
    } else {
        2.0 * (v.ln() - lo.ln()) / (hi.ln() - lo.ln()) - 1.0
    }
}

/// Draws regions and their hidden parameters.
///
/// Features: `f0`, `f1`, `f2` encode `ln beta`, `ln gamma` and
/// `ln population` rescaled to `[-1, 1]`, each plus Gaussian noise; the
/// remaining dimensions are pure noise.
pub fn generate_regions(cfg: &ScenarioConfig) -> Result<(Vec<Region>, Vec<RegionTruth>)> {
    cfg.validate()?;
    let mut rng = cfg.rng(STREAM_REGIONS);
    let noise = Normal::new(0.0, cfg.feature_noise.max(f64::MIN_POSITIVE)).expect("valid sd");
    let width = cfg.n_regions.to_string().len();
    let log_uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
        if hi == lo {
            lo
        } else {
            (rng.random_range(lo.ln()..hi.ln())).exp()
        }
    };

    let mut regions = Vec::with_capacity(cfg.n_regions);
    let mut truth = Vec::with_capacity(cfg.n_regions);
    for k in 0..cfg.n_regions {
        let x_m = rng.random_range(0.0..cfg.extent_m);
        let y_m = rng.random_range(0.0..cfg.extent_m);
        let population = log_uniform(&mut rng, POPULATION_RANGE);
        let beta = log_uniform(&mut rng, cfg.beta_range);
        let gamma = log_uniform(&mut rng, cfg.gamma_range);
        let encoded = [
            log_unit(beta, cfg.beta_range),
            log_unit(gamma, cfg.gamma_range),
            log_unit(population, POPULATION_RANGE),
        ];
        let mut features = Vec::with_capacity(cfg.feature_dim);
        for j in 0..cfg.feature_dim {
            let eps = if cfg.feature_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            features.push(encoded.get(j).copied().unwrap_or(0.0) + eps);
        }
        regions.push(Region {
            id: format!("R{k:0width$}"),
            population,
            x_m,
            y_m,
            features,
        });
        truth.push(RegionTruth {
            beta,
            gamma,
            initial_infected: cfg.initial_infected,
        });
    }
    Ok((regions, truth))
}

/// Integrates the coupled system and reports daily cumulative incidence
/// `N - S(t)` for days `0..=horizon_days`.
///
/// The force of infection on region `v` is
/// `(1 - c) beta_v I_v / N_v + c beta_v sum_w norm_weight(w -> v) I_w / N_w`.
/// With `c = 0` and no noise each series equals a standalone
/// [`crate::sir::integrate_sir`] run bit for bit.
pub fn simulate_coupled_cases(
    regions: &[Region],
    truth: &[RegionTruth],
    graph: &MobilityGraph,
    cfg: &ScenarioConfig,
    dt: f64,
) -> Result<Vec<CaseSeries>> {
    let n = regions.len();
    if truth.len() != n || graph.len() != n {
        return Err(Error::Data(format!(
            "{} regions, {} truths and {} graph nodes",
            n,
            truth.len(),
            graph.len()
        )));
    }
    if graph.nodes.iter().zip(regions).any(|(a, b)| a.id != b.id) {
        return Err(Error::Data("graph was built over different regions".into()));
    }
    let per_day = steps_for(1.0, dt)?;
    if (per_day as f64 * dt - 1.0).abs() > 1e-9 {
        return Err(Error::config("calibration.dt", "must divide one day evenly"));
    }

    let pops: Vec<f64> = regions.iter().map(|r| r.population).collect();
    let inbound: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|v| graph.in_edges(v).map(|e| (e.src, e.norm_weight)).collect())
        .collect();
    let c = cfg.coupling;

    let mut state = vec![0.0; 3 * n];
    for (v, t) in truth.iter().enumerate() {
        state[3 * v] = pops[v] - t.initial_infected;
        state[3 * v + 1] = t.initial_infected;
    }
    let mut scratch = vec![0.0; 15 * n];
    let mut prevalence = vec![0.0; n];
    let days = cfg.horizon_days as usize;
    let mut cumulative = vec![Vec::with_capacity(days + 1); n];

    let record = |state: &[f64], cumulative: &mut Vec<Vec<f64>>| {
        for v in 0..n {
            cumulative[v].push(pops[v] - state[3 * v]);
        }
    };
    record(&state, &mut cumulative);
    for _ in 0..days {
        for _ in 0..per_day {
            rk4_step(&mut state, dt, &mut scratch, |x, dx| {
                for v in 0..n {
                    prevalence[v] = x[3 * v + 1] / pops[v];
                }
                for v in 0..n {
                    let (s, i) = (x[3 * v], x[3 * v + 1]);
                    let beta = truth[v].beta;
                    let imported: f64 = inbound[v].iter().map(|&(w, nw)| nw * prevalence[w]).sum();
                    let local = transmission(beta, s, i, pops[v]);
                    let infections = (1.0 - c) * local + c * beta * s * imported;
                    let recoveries = truth[v].gamma * i;
                    dx[3 * v] = -infections;
                    dx[3 * v + 1] = infections - recoveries;
                    dx[3 * v + 2] = recoveries;
                }
            });
        }
        record(&state, &mut cumulative);
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState("coupled simulation diverged".into()));
    }

    let mut rng = cfg.rng(STREAM_CASE_NOISE);
    let mut out = Vec::with_capacity(n);
    for (v, mut series) in cumulative.into_iter().enumerate() {
        if cfg.noise > 0.0 {
            let cap = pops[v] * (1.0 - 1e-6);
            let mut running: f64 = 0.0;
            for x in series.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                running = running.max((*x * (cfg.noise * z).exp()).min(cap));
                *x = running;
            }
        }
        out.push(CaseSeries {
            region_id: regions[v].id.clone(),
            days: (0..=cfg.horizon_days).collect(),
            cumulative_cases: series,
        });
    }
    Ok(out)
}

/// Everything needed to assemble a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecipe {
    pub scenario: ScenarioConfig,
    pub gravity: GravityConfig,
    pub calibration: CalibConfig,
    /// Threshold multiplier for the risk labels.
    pub k: f64,
}

impl Default for DatasetRecipe {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            gravity: GravityConfig::default(),
            calibration: CalibConfig::default(),
            k: crate::sir::DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub regions: Vec<Region>,
    pub truth: Vec<RegionTruth>,
    pub graph: MobilityGraph,
    pub cases: Vec<CaseSeries>,
    pub calibrations: Vec<Calibration>,
    pub labels: Vec<RiskLabel>,
    pub categorization: Categorization,
    pub split: DatasetSplit,
}

impl Dataset {
    pub fn label_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.label.index()).collect()
    }
}

/// Calibrates every region independently (in parallel); results keep the
/// input order.
pub fn calibrate_regions(
    regions: &[Region],
    cases: &[CaseSeries],
    config: &CalibConfig,
) -> Result<Vec<Calibration>> {
    if regions.len() != cases.len() {
        return Err(Error::Data(format!(
            "{} regions but {} case series",
            regions.len(),
            cases.len()
        )));
    }
    regions
        .par_iter()
        .zip(cases.par_iter())
        .map(|(r, s)| {
            if r.id != s.region_id {
                return Err(Error::Data(format!(
                    "case series `{}` does not match region `{}`",
                    s.region_id, r.id
                )));
            }
            calibrate_sir(s, r.population, config)
        })
        .collect()
}

/// generate, build graph, simulate, calibrate, label, split.
pub fn make_dataset(recipe: &DatasetRecipe) -> Result<Dataset> {
    let cfg = &recipe.scenario;
    recipe.calibration.validate()?;
    let (regions, truth) = generate_regions(cfg)?;
    let graph = build_graph(&regions, &recipe.gravity)?;
    let cases = simulate_coupled_cases(&regions, &truth, &graph, cfg, recipe.calibration.dt)?;
    let calibrations = calibrate_regions(&regions, &cases, &recipe.calibration)?;
    let ids: Vec<&str> = regions.iter().map(|r| r.id.as_str()).collect();
    let r0: Vec<f64> = calibrations.iter().map(|c| c.r0).collect();
    let (labels, categorization) = label_regions(&ids, &r0, recipe.k)?;
    let split = DatasetSplit::random(regions.len(), cfg.seed);
    Ok(Dataset {
        regions,
        truth,
        graph,
        cases,
        calibrations,
        labels,
        categorization,
        split,
    })
}

/// `n` draws from a normal distribution of R0 values, for checking label
/// shares against normal-tail arithmetic.
pub fn normal_r0_sample(n: usize, mean: f64, sd: f64, seed: u64) -> Result<Vec<f64>> {
    let dist = Normal::new(mean, sd).map_err(|e| Error::config("sd", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}
