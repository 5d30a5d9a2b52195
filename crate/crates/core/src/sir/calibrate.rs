use serde::{Deserialize, Serialize};

use super::dynamics::{rk4_step, transmission, SirParams};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::{Error, Result};

/// Cumulative reported cases for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSeries {
    pub region_id: String,
    pub days: Vec<u32>,
    pub cumulative_cases: Vec<f64>,
}

impl CaseSeries {
    pub fn validate(&self, population: f64) -> Result<()> {
        let id = &self.region_id;
        if self.days.len() != self.cumulative_cases.len() {
            return Err(Error::Data(format!("region `{id}`: days and cases differ in length")));
        }
        if self.days.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!("region `{id}`: days must be strictly increasing")));
        }
        if self.cumulative_cases.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Data(format!("region `{id}`: negative or non-finite case count")));
        }
        if self.cumulative_cases.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data(format!("region `{id}`: cumulative cases decrease")));
        }
        if let Some(&last) = self.cumulative_cases.last() {
            if last >= population {
                return Err(Error::Data(format!(
                    "region `{id}`: cumulative cases {last} reach the population {population}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibConfig {
    /// Integrator step in days; `1 / dt` must be a whole number.
    pub dt: f64,
    /// Points per axis of the log-uniform starting grid.
    pub grid_size: usize,
    pub beta_bounds: (f64, f64),
    pub gamma_bounds: (f64, f64),
    pub max_iterations: usize,
    pub tolerance: f64,
    pub min_observations: usize,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            grid_size: 24,
            beta_bounds: (0.01, 2.0),
            gamma_bounds: (0.01, 1.0),
            max_iterations: 500,
            tolerance: 1e-8,
            min_observations: 8,
        }
    }
}

impl CalibConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::config("calibration.dt", "must lie in (0, 1]"));
        }
        let per_day = (1.0 / self.dt).round();
        if (per_day * self.dt - 1.0).abs() > 1e-9 {
            return Err(Error::config("calibration.dt", "must divide one day evenly"));
        }
        if self.grid_size < 2 {
            return Err(Error::config("calibration.grid_size", "must be at least 2"));
        }
        for (name, (lo, hi)) in [
            ("calibration.beta_bounds", self.beta_bounds),
            ("calibration.gamma_bounds", self.gamma_bounds),
        ] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::config(name, "need 0 < lower < upper"));
            }
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("calibration.tolerance", "must be non-negative"));
        }
        Ok(())
    }

    fn steps_per_day(&self) -> usize {
        (1.0 / self.dt).round() as usize
    }
}

/// Outcome of fitting `(beta, gamma)` to one case series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: SirParams,
    /// `beta / gamma` of the fitted parameters.
    pub r0: f64,
    /// Mean squared error normalised by the squared final case count.
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the refined optimum fell outside the search box and was
    /// projected back onto it.
    pub clamped: bool,
}

/// Fits a closed SIR model to `series` by least squares on cumulative
/// incidence `N - S(t)`.
///
/// The search runs in `(ln beta, ln gamma)`: a log-uniform grid picks the
/// starting point and Nelder-Mead refines it.
pub fn calibrate_sir(series: &CaseSeries, population: f64, config: &CalibConfig) -> Result<Calibration> {
    config.validate()?;
    if !(population > 0.0 && population.is_finite()) {
        return Err(Error::config("population", "must be positive"));
    }
    series.validate(population)?;
    if series.days.len() < config.min_observations {
        return Err(Error::Data(format!(
            "region `{}`: {} observations, need at least {}",
            series.region_id,
            series.days.len(),
            config.min_observations
        )));
    }
    let first = series.cumulative_cases[0];
    let last = *series.cumulative_cases.last().unwrap();
    if last <= 0.0 || last == first {
        return Err(Error::DegenerateSeries(series.region_id.clone()));
    }

    let i0 = first.max(1.0);
    let objective = Objective {
        population,
        i0,
        days: &series.days,
        observed: &series.cumulative_cases,
        scale: last.max(1.0),
        dt: config.dt,
        steps_per_day: config.steps_per_day(),
    };

    let (b_lo, b_hi) = (config.beta_bounds.0.ln(), config.beta_bounds.1.ln());
    let (g_lo, g_hi) = (config.gamma_bounds.0.ln(), config.gamma_bounds.1.ln());
    let g = config.grid_size;
    let axis = |lo: f64, hi: f64, j: usize| lo + (j + 1) as f64 / g as f64 * (hi - lo);

    let mut best = (f64::INFINITY, [axis(b_lo, b_hi, g - 1), axis(g_lo, g_hi, g - 1)]);
    for bj in 0..g {
        for gj in 0..g {
            let x = [axis(b_lo, b_hi, bj), axis(g_lo, g_hi, gj)];
            let v = objective.eval(x[0].exp(), x[1].exp());
            if v < best.0 {
                best = (v, x);
            }
        }
    }

    let clamp = |x: &[f64]| [x[0].clamp(b_lo, b_hi), x[1].clamp(g_lo, g_hi)];
    let step = [(b_hi - b_lo) / g as f64, (g_hi - g_lo) / g as f64];
    let refined = nelder_mead(
        |x| {
            let [lb, lg] = clamp(x);
            objective.eval(lb.exp(), lg.exp())
        },
        &best.1,
        &step,
        NelderMeadOptions {
            max_iterations: config.max_iterations,
            tolerance: config.tolerance,
        },
    );

    let bounded = clamp(&refined.x);
    let clamped = bounded[0] != refined.x[0] || bounded[1] != refined.x[1];
    let (beta, gamma) = (bounded[0].exp(), bounded[1].exp());
    let params = SirParams::seeded(beta, gamma, population, i0)?;
    Ok(Calibration {
        params,
        r0: beta / gamma,
        loss: objective.eval(beta, gamma),
        iterations: refined.iterations,
        converged: refined.converged,
        clamped,
    })
}

struct Objective<'a> {
    population: f64,
    i0: f64,
    days: &'a [u32],
    observed: &'a [f64],
    scale: f64,
    dt: f64,
    steps_per_day: usize,
}

impl Objective<'_> {
    fn eval(&self, beta: f64, gamma: f64) -> f64 {
        let n = self.population;
        let mut state = [n - self.i0, self.i0, 0.0];
        let mut scratch = [0.0; 15];
        let mut step = 0usize;
        let mut sse = 0.0;
        for (&day, &obs) in self.days.iter().zip(self.observed) {
            let target = day as usize * self.steps_per_day;
            while step < target {
                rk4_step(&mut state, self.dt, &mut scratch, |x, dx| {
                    let infections = transmission(beta, x[0], x[1], n);
                    let recoveries = gamma * x[1];
                    dx[0] = -infections;
                    dx[1] = infections - recoveries;
                    dx[2] = recoveries;
                });
                step += 1;
            }
            let resid = (n - state[0] - obs) / self.scale;
            sse += resid * resid;
        }
        let mse = sse / self.days.len() as f64;
        if mse.is_finite() {
            mse
        } else {
            f64::INFINITY
        }
    }
}
