//! Stage orchestration over files.
//!
//! Each stage reads its inputs from the output directory, writes its
//! outputs there, and returns a one-line summary. [`run_pipeline`] runs
//! everything in memory and writes the same files the stages would.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Checkpoint, Tensor};
use crate::io;
use crate::mobility::{build_graph, GravityConfig, MobilityGraph, Region};
use crate::model::{evaluate, mean_f1, run_ablations, train, AblationRow, DatasetSplit, EpiGcn, EpiGcnConfig};
use crate::sir::{label_regions, CalibConfig, Calibration, CaseSeries, RiskLabel, DEFAULT_K};
use crate::synth::{calibrate_regions, make_dataset, DatasetRecipe, ScenarioConfig};
use crate::{Error, Result};

/// File names, relative to the output directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub regions: PathBuf,
    pub features: PathBuf,
    pub cases: PathBuf,
    pub graph: PathBuf,
    pub labels: PathBuf,
    pub split: PathBuf,
    pub r0: PathBuf,
    pub model: PathBuf,
    pub history: PathBuf,
    pub metrics: PathBuf,
    pub ablation: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            regions: "regions.csv".into(),
            features: "features.csv".into(),
            cases: "cases.csv".into(),
            graph: "graph.json".into(),
            labels: "labels.csv".into(),
            split: "split.json".into(),
            r0: "r0.csv".into(),
            model: "model.json".into(),
            history: "history.csv".into(),
            metrics: "metrics.json".into(),
            ablation: "ablation.json".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Seeds per variant, counting up from the model seed.
    pub seeds: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { seeds: 3 }
    }
}

/// One JSON document configuring every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// When set, overrides both `scenario.seed` and `model.seed`.
    pub seed: Option<u64>,
    pub k: f64,
    pub out_dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub gravity: GravityConfig,
    pub calibration: CalibConfig,
    pub model: EpiGcnConfig,
    pub ablation: AblationConfig,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            k: DEFAULT_K,
            out_dir: "out".into(),
            scenario: ScenarioConfig::default(),
            gravity: GravityConfig::default(),
            calibration: CalibConfig::default(),
            model: EpiGcnConfig::default(),
            ablation: AblationConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config {
            field: json_field(&e.to_string()),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_to_string(path)?)
    }

    /// Applies the top-level seed to the sections that consume one.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if let Some(s) = c.seed {
            c.scenario.seed = s;
            c.model.seed = s;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::config("k", "must be positive and finite"));
        }
        if self.ablation.seeds == 0 {
            return Err(Error::config("ablation.seeds", "must be at least 1"));
        }
        self.scenario.validate()?;
        self.gravity.validate()?;
        self.calibration.validate()?;
        self.model.validate()
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn recipe(&self) -> DatasetRecipe {
        DatasetRecipe {
            scenario: self.scenario,
            gravity: self.gravity,
            calibration: self.calibration,
            k: self.k,
        }
    }

    fn ablation_seeds(&self) -> Vec<u64> {
        (0..self.ablation.seeds as u64).map(|s| self.model.seed + s).collect()
    }
}

// serde reports "unknown field `x`" or "invalid type ... at line"; pull the
// backticked name out when there is one.
fn json_field(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("config").to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Calibrate,
    Label,
    BuildGraph,
    Train,
    Evaluate,
    Ablate,
    Pipeline,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Simulate,
        Stage::Calibrate,
        Stage::Label,
        Stage::BuildGraph,
        Stage::Train,
        Stage::Evaluate,
        Stage::Ablate,
        Stage::Pipeline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Calibrate => "calibrate",
            Stage::Label => "label",
            Stage::BuildGraph => "build-graph",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
            Stage::Pipeline => "pipeline",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::config("stage", format!("unknown stage `{s}`")))
    }
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<String> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    match stage {
        Stage::Simulate => simulate(&cfg),
        Stage::Calibrate => calibrate(&cfg),
        Stage::Label => label(&cfg),
        Stage::BuildGraph => graph(&cfg),
        Stage::Train => train_stage(&cfg),
        Stage::Evaluate => evaluate_stage(&cfg),
        Stage::Ablate => ablate(&cfg),
        Stage::Pipeline => run_pipeline(&cfg),
    }
}

fn strip_features(regions: &[Region]) -> Vec<Region> {
    regions
        .iter()
        .map(|r| Region {
            features: Vec::new(),
            ..r.clone()
        })
        .collect()
}

fn ids(regions: &[Region]) -> Vec<String> {
    regions.iter().map(|r| r.id.clone()).collect()
}

fn write_bundle(cfg: &PipelineConfig, ds: &crate::synth::Dataset) -> Result<()> {
    let p = &cfg.paths;
    let plain = strip_features(&ds.regions);
    let graph = MobilityGraph::from_parts(ds.graph.config, plain.clone(), ds.graph.edges.clone())?;
    io::write_regions_csv(&cfg.path(&p.regions), &plain)?;
    io::write_features_csv(&cfg.path(&p.features), &ds.regions)?;
    io::write_cases_csv(&cfg.path(&p.cases), &ds.cases)?;
    io::write_graph_json(&cfg.path(&p.graph), &graph)?;
    io::write_labels_csv(&cfg.path(&p.labels), &ds.labels)?;
    io::write_json(&cfg.path(&p.split), &io::SplitFile::from_split(&ds.split, &ids(&ds.regions)))
}

fn counts_summary(labels: &[RiskLabel]) -> String {
    let mut c = [0usize; 3];
    for l in labels {
        c[l.label.index()] += 1;
    }
    format!("low/medium/high = {}/{}/{}", c[0], c[1], c[2])
}

fn simulate(cfg: &PipelineConfig) -> Result<String> {
    let ds = make_dataset(&cfg.recipe())?;
    write_bundle(cfg, &ds)?;
    Ok(format!(
        "simulate: {} regions, {} edges, labels {}",
        ds.regions.len(),
        ds.graph.edges.len(),
        counts_summary(&ds.labels)
    ))
}

/// Case series reordered to match `regions`.
fn align_cases(regions: &[Region], cases: Vec<CaseSeries>) -> Result<Vec<CaseSeries>> {
    let mut by_id: HashMap<String, CaseSeries> = cases.into_iter().map(|c| (c.region_id.clone(), c)).collect();
    regions
        .iter()
        .map(|r| {
            by_id
                .remove(&r.id)
                .ok_or_else(|| Error::Data(format!("no case series for region `{}`", r.id)))
        })
        .collect()
}

fn write_r0(cfg: &PipelineConfig, regions: &[Region], fits: &[Calibration]) -> Result<()> {
    io::write_r0_csv(&cfg.path(&cfg.paths.r0), &ids(regions), fits)
}

fn calibrate(cfg: &PipelineConfig) -> Result<String> {
    let regions = io::read_regions_csv(&cfg.path(&cfg.paths.regions))?;
    let cases = align_cases(&regions, io::read_cases_csv(&cfg.path(&cfg.paths.cases))?)?;
    let fits = calibrate_regions(&regions, &cases, &cfg.calibration)?;
    write_r0(cfg, &regions, &fits)?;
    let clamped = fits.iter().filter(|f| f.clamped).count();
    Ok(format!("calibrate: {} regions fitted, {clamped} clamped to bounds", fits.len()))
}

fn label(cfg: &PipelineConfig) -> Result<String> {
    let r0 = io::read_r0_csv(&cfg.path(&cfg.paths.r0))?;
    let names: Vec<&str> = r0.iter().map(|(id, _)| id.as_str()).collect();
    let values: Vec<f64> = r0.iter().map(|(_, v)| *v).collect();
    let (labels, cat) = label_regions(&names, &values, cfg.k)?;
    io::write_labels_csv(&cfg.path(&cfg.paths.labels), &labels)?;
    Ok(format!(
        "label: thresholds [{:.4}, {:.4}], {}",
        cat.lower,
        cat.upper,
        counts_summary(&labels)
    ))
}

fn graph(cfg: &PipelineConfig) -> Result<String> {
    let regions = io::read_regions_csv(&cfg.path(&cfg.paths.regions))?;
    let g = build_graph(&regions, &cfg.gravity)?;
    io::write_graph_json(&cfg.path(&cfg.paths.graph), &g)?;
    Ok(format!("build-graph: {} nodes, {} edges", g.len(), g.edges.len()))
}

/// Graph, features, labels and split loaded and aligned to graph order.
pub struct Inputs {
    pub graph: MobilityGraph,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub split: DatasetSplit,
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    let p = &cfg.paths;
    let graph = io::read_graph_json(&cfg.path(&p.graph))?;
    let feats = io::read_features_csv(&cfg.path(&p.features))?;
    let labels = io::read_labels_csv(&cfg.path(&p.labels))?;
    let split_file: io::SplitFile = io::read_json(&cfg.path(&p.split))?;

    let node_ids = ids(&graph.nodes);
    let rows = node_ids
        .iter()
        .map(|id| {
            feats
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Data(format!("no features for region `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let features = Tensor::from_rows(&rows)?;
    let by_id: HashMap<&str, usize> = labels.iter().map(|l| (l.region_id.as_str(), l.label.index())).collect();
    let labels = node_ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Data(format!("no label for region `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let split = split_file.to_split(&node_ids)?;
    Ok(Inputs {
        graph,
        features,
        labels,
        split,
    })
}

fn write_model(cfg: &PipelineConfig, model: &EpiGcn) -> Result<()> {
    let mut s = model.to_checkpoint()?.to_json()?;
    s.push('\n');
    io::write_atomic(&cfg.path(&cfg.paths.model), s.as_bytes())
}

fn train_on(cfg: &PipelineConfig, inp: &Inputs) -> Result<(EpiGcn, String)> {
    let out = train(&inp.graph, &inp.features, &inp.labels, &inp.split, &cfg.model)?;
    write_model(cfg, &out.model)?;
    io::write_history_csv(&cfg.path(&cfg.paths.history), &out.history)?;
    let best = match out.best_epoch {
        Some(e) => format!(
            "best epoch {e} (val weighted F1 {:.4})",
            out.history[e].val_weighted_f1
        ),
        None => "no validation split".to_string(),
    };
    let summary = format!(
        "train: {} on {} nodes, {} epochs, {best}",
        cfg.model.variant,
        inp.graph.len(),
        out.history.len()
    );
    Ok((out.model, summary))
}

fn evaluate_on(cfg: &PipelineConfig, inp: &Inputs, model: &EpiGcn) -> Result<String> {
    let m = evaluate(model, &inp.graph, &inp.features, &inp.labels, &inp.split.test)?;
    io::write_metrics_json(&cfg.path(&cfg.paths.metrics), &m)?;
    Ok(format!(
        "evaluate: test weighted F1 {:.4}, precision {:.4}, recall {:.4}",
        m.weighted_f1, m.weighted_precision, m.weighted_recall
    ))
}

fn ablate_on(cfg: &PipelineConfig, inp: &Inputs) -> Result<String> {
    let rows = run_ablations(
        &inp.graph,
        &inp.features,
        &inp.labels,
        &inp.split,
        &cfg.model,
        &cfg.ablation_seeds(),
    )?;
    io::write_ablation_json(&cfg.path(&cfg.paths.ablation), &rows)?;
    Ok(format!("ablate: {} rows, {}", rows.len(), mean_summary(&rows)))
}

fn mean_summary(rows: &[AblationRow]) -> String {
    mean_f1(rows)
        .iter()
        .map(|(v, f)| format!("{v} {f:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn train_stage(cfg: &PipelineConfig) -> Result<String> {
    let inp = load_inputs(cfg)?;
    Ok(train_on(cfg, &inp)?.1)
}

fn evaluate_stage(cfg: &PipelineConfig) -> Result<String> {
    let inp = load_inputs(cfg)?;
    let ck = Checkpoint::from_json(&io::read_to_string(&cfg.path(&cfg.paths.model))?)?;
    let model = EpiGcn::from_checkpoint(&ck)?;
    evaluate_on(cfg, &inp, &model)
}

fn ablate(cfg: &PipelineConfig) -> Result<String> {
    let inp = load_inputs(cfg)?;
    ablate_on(cfg, &inp)
}

/// Every stage in one process, without re-reading intermediate files.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<String> {
    let ds = make_dataset(&cfg.recipe())?;
    write_bundle(cfg, &ds)?;
    write_r0(cfg, &ds.regions, &ds.calibrations)?;

    let rows = ds.regions.iter().map(|r| r.features.clone()).collect::<Vec<_>>();
    let inp = Inputs {
        graph: MobilityGraph::from_parts(ds.graph.config, strip_features(&ds.regions), ds.graph.edges.clone())?,
        features: Tensor::from_rows(&rows)?,
        labels: ds.label_indices(),
        split: ds.split.clone(),
    };
    let (model, _) = train_on(cfg, &inp)?;
    let eval = evaluate_on(cfg, &inp, &model)?;
    let abl = ablate_on(cfg, &inp)?;
    Ok(format!("pipeline: {} regions; {eval}; {abl}", ds.regions.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_names_field() {
        let err = PipelineConfig::from_json(r#"{"scenario": {"n_region": 5}}"#).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "n_region"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn validation_names_section() {
        let mut c = PipelineConfig::default();
        c.model.hidden_dim = 0;
        match c.validate().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "model.hidden_dim"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn seed_overrides_sections() {
        let c = PipelineConfig {
            seed: Some(42),
            ..PipelineConfig::default()
        }
        .resolved();
        assert_eq!((c.scenario.seed, c.model.seed), (42, 42));
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
    }
}
