//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use epirisk::metrics::weighted_metrics;
use epirisk::mobility::{build_graph, GravityConfig, Neighbors, Region};
use epirisk::model::{mean_f1, run_ablations, AblationRow, EpiGcn, EpiGcnConfig, Variant};
use epirisk::sir::{calibrate_sir, categorize_r0, integrate_sir, CalibConfig, CaseSeries, SirParams};
use epirisk::synth::{make_dataset, normal_r0_sample, Dataset, DatasetRecipe};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(t: Instant, limit: Duration) -> (bool, f64) {
    let s = t.elapsed().as_secs_f64();
    (s < limit.as_secs_f64(), s)
}

fn sir_conservation() -> Outcome {
    let t = Instant::now();
    let mut rng = common::rng(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = 10f64.powf(rng.random_range(3.0..7.0));
        let params = SirParams::seeded(
            rng.random_range(0.05..1.5),
            rng.random_range(0.02..0.8),
            n,
            rng.random_range(1.0..n / 100.0),
        )
        .unwrap();
        let traj = integrate_sir(&params, 300.0, 0.1).unwrap();
        worst = worst.max(traj.max_mass_error(n) / n);
    }
    let (fast, secs) = within(t, Duration::from_secs(5));
    outcome(
        worst <= 1e-6 && fast,
        format!("max |S+I+R-N|/N = {worst:.2e} over 50 parameter sets, {secs:.2}s"),
    )
}

fn daily_series(beta: f64, gamma: f64, n: f64, i0: f64, days: u32) -> CaseSeries {
    let traj = integrate_sir(&SirParams::seeded(beta, gamma, n, i0).unwrap(), days as f64, 0.1).unwrap();
    CaseSeries {
        region_id: format!("b{beta}_g{gamma}"),
        days: (0..=days).collect(),
        cumulative_cases: (0..=days as usize).map(|d| n - traj.s[d * 10]).collect(),
    }
}

fn calibration_round_trip() -> Outcome {
    let t = Instant::now();
    let cfg = CalibConfig::default();
    let mut worst = (0.0f64, 0.0, 0.0);
    for a in 0..5 {
        for b in 0..5 {
            let beta = 0.1 + 0.5 * a as f64 / 4.0;
            let gamma = 0.05 + 0.25 * b as f64 / 4.0;
            let series = daily_series(beta, gamma, 50_000.0, 20.0, 120);
            let fit = calibrate_sir(&series, 50_000.0, &cfg).unwrap();
            let err = (fit.r0 - beta / gamma).abs() / (beta / gamma);
            if err > worst.0 {
                worst = (err, beta, gamma);
            }
        }
    }
    let (fast, secs) = within(t, Duration::from_secs(60));
    outcome(
        worst.0 <= 0.05 && fast,
        format!(
            "worst R0 relative error {:.2e} at beta={}, gamma={} over 25 cells, {secs:.1}s",
            worst.0, worst.1, worst.2
        ),
    )
}

/// Dense enumeration: every ordered pair, sorted per destination.
fn dense_top_k(regions: &[Region], cfg: &GravityConfig, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = regions.len();
    let mut dense = vec![vec![0.0; n]; n];
    for (w, src) in regions.iter().enumerate() {
        for (v, dst) in regions.iter().enumerate() {
            if v != w {
                let d = (src.x_m - dst.x_m).hypot(src.y_m - dst.y_m);
                dense[w][v] = src.population.powf(cfg.rho) * dst.population.powf(cfg.theta) / (d / cfg.delta).exp();
            }
        }
    }
    (0..n)
        .map(|v| {
            let mut col: Vec<(usize, f64)> = (0..n).filter(|&w| w != v).map(|w| (w, dense[w][v])).collect();
            col.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(regions[a.0].id.cmp(&regions[b.0].id)));
            col.truncate(k);
            col
        })
        .collect()
}

fn gravity_oracle() -> Outcome {
    let mut rng = common::rng(303);
    let mut mismatches = 0;
    let mut worst_sum = 0.0f64;
    for inst in 0..10 {
        let regions = common::random_regions(&mut rng, 10, 150_000.0);
        let k = 1 + inst % 9;
        for neighbors in [Neighbors::TopK(k), Neighbors::Full] {
            let cfg = GravityConfig {
                neighbors,
                ..GravityConfig::default()
            };
            let keep = match neighbors {
                Neighbors::TopK(k) => k,
                Neighbors::Full => 9,
            };
            let graph = build_graph(&regions, &cfg).unwrap();
            for (v, want) in dense_top_k(&regions, &cfg, keep).iter().enumerate() {
                let got: Vec<(usize, f64)> = graph.in_edges(v).map(|e| (e.src, e.raw_weight)).collect();
                if got != *want {
                    mismatches += 1;
                }
                let sum: f64 = graph.in_edges(v).map(|e| e.norm_weight).sum();
                worst_sum = worst_sum.max((sum - 1.0).abs());
            }
        }
    }
    outcome(
        mismatches == 0 && worst_sum <= 1e-9,
        format!("{mismatches} mismatched in-edge lists, max |sum norm_weight - 1| = {worst_sum:.1e}"),
    )
}

fn gradient_check() -> Outcome {
    let t = Instant::now();
    let mut rng = common::rng(404);
    let graph = common::random_graph(&mut rng, 10, 4);
    let features = common::random_features(&mut rng, 10, 6);
    let labels: Vec<usize> = (0..10).map(|_| rng.random_range(0..3)).collect();
    let weights = vec![1.0; 10];
    let cfg = EpiGcnConfig {
        hidden_dim: 8,
        num_layers: 2,
        seed: 5,
        ..EpiGcnConfig::default()
    };
    let model = EpiGcn::new(6, cfg).unwrap();
    let (_, _, grads) = model.loss_and_grads(&graph, &features, &labels, &weights).unwrap();

    let h = 1e-5;
    let mut probe = model.clone();
    let mut checked = 0;
    let mut worst = (0.0f64, String::new());
    let names: Vec<String> = model.params().iter().map(|(n, _)| n.clone()).collect();
    for name in &names {
        let len = model.params().get(name).unwrap().data().len();
        for j in 0..len {
            let orig = model.params().get(name).unwrap().data()[j];
            let mut loss_at = |x: f64| {
                probe.params_mut().get_mut(name).unwrap().data_mut()[j] = x;
                probe.loss_and_grads(&graph, &features, &labels, &weights).unwrap().0
            };
            let numeric = (loss_at(orig + h) - loss_at(orig - h)) / (2.0 * h);
            loss_at(orig);
            let analytic = grads[name].data()[j];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            if err > worst.0 {
                worst = (err, format!("{name}[{j}]"));
            }
            checked += 1;
        }
    }
    let (fast, secs) = within(t, Duration::from_secs(30));
    outcome(
        worst.0 < 1e-4 && checked >= 200 && fast,
        format!("{checked} entries, max relative error {:.2e} at {}, {secs:.2}s", worst.0, worst.1),
    )
}

fn message_passing_conservation() -> Outcome {
    let mut rng = common::rng(505);
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let n = rng.random_range(4..16);
        let k = rng.random_range(1..n);
        let graph = common::random_graph(&mut rng, n, k);
        let features = common::random_features(&mut rng, n, 5);
        let cfg = EpiGcnConfig {
            hidden_dim: 8,
            num_layers: 3,
            seed: inst,
            ..EpiGcnConfig::default()
        };
        let trace = EpiGcn::new(5, cfg).unwrap().compartment_trace(&graph, &features).unwrap();
        let mass = |c: &[epirisk::autodiff::Tensor; 3]| -> Vec<f64> {
            (0..c[0].data().len()).map(|k| c[0].data()[k] + c[1].data()[k] + c[2].data()[k]).collect()
        };
        let before = mass(&trace[0]);
        for layer in &trace[1..] {
            for (a, b) in before.iter().zip(mass(layer)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max elementwise drift of S+I+R across layers {worst:.1e} on 20 instances"),
    )
}

/// Per-class counts by direct scans over the samples.
fn brute_weighted(truth: &[usize], pred: &[usize], c: usize) -> (f64, f64, f64) {
    let n = truth.len() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for class in 0..c {
        let tp = truth.iter().zip(pred).filter(|(t, q)| **t == class && **q == class).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, q)| **t != class && **q == class).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(t, q)| **t == class && **q != class).count() as f64;
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        let share = (tp + fn_) / n;
        p += share * prec;
        r += share * rec;
        f += share * f1;
    }
    (p, r, f)
}

fn metrics_oracle() -> Outcome {
    let mut rng = common::rng(606);
    let mut worst = 0.0f64;
    let mut identity = 0.0f64;
    for _ in 0..1000 {
        let c = rng.random_range(2..7);
        let n = rng.random_range(1..200);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let m = weighted_metrics(&truth, &pred, c).unwrap();
        let (p, r, f) = brute_weighted(&truth, &pred, c);
        worst = worst
            .max((m.weighted_precision - p).abs())
            .max((m.weighted_recall - r).abs())
            .max((m.weighted_f1 - f).abs());
        let acc = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / n as f64;
        identity = identity.max((m.weighted_recall - acc).abs());
    }
    outcome(
        worst <= 1e-12 && identity <= 1e-12,
        format!("max deviation from brute force {worst:.1e}, |recall - accuracy| {identity:.1e}, 1000 instances"),
    )
}

struct AblationRun {
    dataset: Dataset,
    rows: Vec<AblationRow>,
    secs: f64,
}

fn ablation_run() -> &'static AblationRun {
    static RUN: OnceLock<AblationRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t = Instant::now();
        let recipe = DatasetRecipe::default();
        assert_eq!((recipe.scenario.n_regions, recipe.scenario.coupling), (600, 0.4));
        let dataset = make_dataset(&recipe).unwrap();
        let features = epirisk::autodiff::Tensor::from_rows(
            &dataset.regions.iter().map(|r| r.features.clone()).collect::<Vec<_>>(),
        )
        .unwrap();
        let rows = run_ablations(
            &dataset.graph,
            &features,
            &dataset.label_indices(),
            &dataset.split,
            &EpiGcnConfig::default(),
            &[0, 1, 2],
        )
        .unwrap();
        AblationRun {
            dataset,
            rows,
            secs: t.elapsed().as_secs_f64(),
        }
    })
}

fn per_seed(rows: &[AblationRow], v: Variant) -> Vec<f64> {
    rows.iter().filter(|r| r.variant == v).map(|r| r.f1).collect()
}

fn fmt_seeds(v: &[f64]) -> String {
    v.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join("/")
}

fn learnability() -> Outcome {
    let run = ablation_run();
    let labels = run.dataset.label_indices();
    let test: Vec<usize> = run.dataset.split.test.iter().map(|&i| labels[i]).collect();
    let mut counts = [0usize; 3];
    for &l in &labels {
        counts[l] += 1;
    }
    let majority = (0..3).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
    let baseline = weighted_metrics(&test, &vec![majority; test.len()], 3).unwrap().weighted_f1;
    let full = per_seed(&run.rows, Variant::Full);
    let ok = full.iter().all(|&f| f >= 0.80 && f > baseline) && run.secs < 300.0;
    outcome(
        ok,
        format!(
            "full test F1 per seed {} vs majority-class {baseline:.4} (labels {counts:?}), {:.0}s",
            fmt_seeds(&full),
            run.secs
        ),
    )
}

fn ablation_direction() -> Outcome {
    let run = ablation_run();
    let means: BTreeMap<&str, f64> = mean_f1(&run.rows).into_iter().map(|(v, f)| (v.as_str(), f)).collect();
    let detail = Variant::ALL
        .iter()
        .map(|&v| format!("{v} {:.4} [{}]", means[v.as_str()], fmt_seeds(&per_seed(&run.rows, v))))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        means["full"] > means["no_gravity"] && means["full"] > means["vanilla_mp"],
        format!("mean test F1: {detail}"),
    )
}

const STAGES: [&str; 7] = ["simulate", "calibrate", "label", "build-graph", "train", "evaluate", "ablate"];

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_epirisk")).args(args).output().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(
        &config,
        r#"{"scenario": {"n_regions": 40, "horizon_days": 60}, "model": {"epochs": 15}, "ablation": {"seeds": 2}}"#,
    )
    .unwrap();
    let config = config.to_str().unwrap();
    let mut differing = Vec::new();
    let mut failures = Vec::new();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for stage in STAGES {
        let mut outputs = Vec::new();
        for dir in &dirs {
            let out = cli(&[stage, "--config", config, "--seed", "11", "--out", dir.to_str().unwrap()]);
            if !out.status.success() {
                failures.push(stage);
            }
            outputs.push(snapshot(dir));
        }
        if outputs[0] != outputs[1] {
            differing.push(stage);
        }
    }
    let files = snapshot(&dirs[0]).len();
    outcome(
        failures.is_empty() && differing.is_empty() && files == 11,
        format!("7 stages run twice, {files} files compared; failing {failures:?}, differing {differing:?}"),
    )
}

fn label_shape() -> Outcome {
    let mut worst_k1 = 0.0f64;
    let mut worst_mid = 0.0f64;
    let mut shares = Vec::new();
    for seed in 0..5 {
        let r0 = normal_r0_sample(2000, 2.0, 0.4, seed).unwrap();
        let c1 = categorize_r0(&r0, 1.0).unwrap().counts();
        for (got, want) in c1.iter().zip([16.0, 68.0, 16.0]) {
            worst_k1 = worst_k1.max((*got as f64 / 20.0 - want).abs());
        }
        let mid = categorize_r0(&r0, epirisk::sir::DEFAULT_K).unwrap().counts()[1] as f64 / 20.0;
        worst_mid = worst_mid.max((mid - 52.0).abs());
        shares.push(format!("{:.1}", mid));
    }
    outcome(
        worst_k1 <= 4.0 && worst_mid <= 5.0,
        format!(
            "k=1 max share deviation {worst_k1:.2} points; k=0.71 medium shares {} %",
            shares.join("/")
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("SIR conservation", sir_conservation),
        ("calibration round trip", calibration_round_trip),
        ("gravity graph oracle", gravity_oracle),
        ("gradient correctness", gradient_check),
        ("message-passing conservation", message_passing_conservation),
        ("metrics oracle", metrics_oracle),
        ("learnability", learnability),
        ("ablation direction", ablation_direction),
        ("CLI determinism", cli_determinism),
        ("label shape", label_shape),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
