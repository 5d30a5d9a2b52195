//! Three-level risk labels from mean and standard deviation of R0.
//!
//! cargo run --example risk_labels [-- <k>]

use epirisk::sir::{categorize_r0, label_regions, DEFAULT_K};
use epirisk::synth::normal_r0_sample;

fn main() -> epirisk::Result<()> {
    let k: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(DEFAULT_K);

    let ids = ["a", "b", "c", "d", "e"];
    let (labels, cat) = label_regions(&ids, &[1.0, 2.0, 2.0, 2.0, 3.0], 1.0)?;
    println!("mean {:.3}, sd {:.3}, thresholds ({:.3}, {:.3})", cat.mean, cat.std_dev, cat.lower, cat.upper);
    for l in &labels {
        println!("  {} r0={} -> {:?}", l.region_id, l.r0, l.label);
    }

    let r0 = normal_r0_sample(2000, 2.0, 0.4, 0)?;
    let counts = categorize_r0(&r0, k)?.counts();
    let pct = |c: usize| 100.0 * c as f64 / r0.len() as f64;
    println!(
        "k={k}: low/medium/high = {:.1}% / {:.1}% / {:.1}%",
        pct(counts[0]),
        pct(counts[1]),
        pct(counts[2])
    );
    Ok(())
}
