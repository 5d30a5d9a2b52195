//! Generates a synthetic bundle and writes the six artifact files.
//!
//! cargo run --release --example synthetic_bundle [-- <out_dir> <n_regions>]

use std::path::PathBuf;

use epirisk::pipeline::{run_stage, PipelineConfig, Stage};

fn main() -> epirisk::Result<()> {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().unwrap_or_else(|| "bundle".into()).into();
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);

    let mut cfg = PipelineConfig {
        out_dir: out.clone(),
        ..PipelineConfig::default()
    };
    cfg.scenario.n_regions = n;
    println!("{}", run_stage(Stage::Simulate, &cfg)?);
    for entry in std::fs::read_dir(&out).map_err(|source| epirisk::Error::Io { path: out.clone(), source })? {
        let entry = entry.map_err(|source| epirisk::Error::Io { path: out.clone(), source })?;
        let len = entry.metadata().map(|m| m.len()).unwrap_or(0);
        println!("  {:<14} {len:>9} bytes", entry.file_name().to_string_lossy());
    }
    Ok(())
}
