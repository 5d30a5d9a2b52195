//! Runs the pipeline stage by stage through the library, the same way the
//! `epirisk` binary does, and shows each stage's summary line.
//!
//! cargo run --release --example cli_stages [-- <out_dir>]

use epirisk::pipeline::{run_stage, PipelineConfig, Stage};

fn main() -> epirisk::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "stages".into());
    let cfg = PipelineConfig::from_json(&format!(
        r#"{{"seed": 1, "out_dir": {out:?},
            "scenario": {{"n_regions": 80, "horizon_days": 90}},
            "model": {{"epochs": 100}},
            "ablation": {{"seeds": 2}}}}"#
    ))?;
    for stage in Stage::ALL.iter().filter(|s| **s != Stage::Pipeline) {
        println!("{}", run_stage(*stage, &cfg)?);
    }
    Ok(())
}
