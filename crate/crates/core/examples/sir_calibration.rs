//! Integrates an SIR epidemic, samples daily cumulative incidence and fits
//! `(beta, gamma)` back from it.
//!
//! cargo run --release --example sir_calibration [-- <beta> <gamma>]

use epirisk::sir::{basic_reproduction_number, calibrate_sir, integrate_sir, CalibConfig, CaseSeries, SirParams};

fn main() -> epirisk::Result<()> {
    let mut args = std::env::args().skip(1);
    let beta: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.30);
    let gamma: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.15);
    let (n, i0, days) = (50_000.0, 20.0, 120u32);

    let params = SirParams::seeded(beta, gamma, n, i0)?;
    let traj = integrate_sir(&params, days as f64, 0.1)?;
    let peak = (0..traj.len()).max_by(|&a, &b| traj.i[a].total_cmp(&traj.i[b])).unwrap_or(0);
    println!(
        "true R0 {:.3}; peak I {:.0} on day {:.1}; attack rate {:.1}%",
        basic_reproduction_number(&params)?,
        traj.i[peak],
        traj.times[peak],
        100.0 * traj.r.last().copied().unwrap_or(0.0) / n
    );

    let series = CaseSeries {
        region_id: "demo".into(),
        days: (0..=days).collect(),
        cumulative_cases: (0..=days as usize).map(|d| n - traj.s[d * 10]).collect(),
    };
    let fit = calibrate_sir(&series, n, &CalibConfig::default())?;
    println!(
        "fitted beta {:.5}, gamma {:.5}, R0 {:.4} (loss {:.2e}, {} iterations, converged {})",
        fit.params.beta, fit.params.gamma, fit.r0, fit.loss, fit.iterations, fit.converged
    );
    Ok(())
}
