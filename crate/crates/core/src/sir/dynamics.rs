use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameters and initial state of a closed-population SIR model.
///
/// `r0` here is the initial recovered count, not the reproduction number;
/// see [`basic_reproduction_number`] for the latter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub beta: f64,
    pub gamma: f64,
    pub population: f64,
    pub s0: f64,
    pub i0: f64,
    pub r0: f64,
}

impl SirParams {
    /// Builds parameters for an outbreak seeded with `i0` infectious people
    /// and nobody recovered.
    pub fn seeded(beta: f64, gamma: f64, population: f64, i0: f64) -> Result<Self> {
        Self::new(beta, gamma, population, population - i0, i0, 0.0)
    }

    pub fn new(beta: f64, gamma: f64, population: f64, s0: f64, i0: f64, r0: f64) -> Result<Self> {
        let params = Self {
            beta,
            gamma,
            population,
            s0,
            i0,
            r0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.beta, self.gamma, self.population, self.s0, self.i0, self.r0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite SIR parameter".into()));
        }
        if self.beta < 0.0 {
            return Err(Error::config("beta", "must be non-negative"));
        }
        if self.gamma < 0.0 {
            return Err(Error::config("gamma", "must be non-negative"));
        }
        if self.population <= 0.0 {
            return Err(Error::config("population", "must be positive"));
        }
        if self.s0 < 0.0 || self.i0 < 0.0 || self.r0 < 0.0 {
            return Err(Error::config("initial_state", "compartments must be non-negative"));
        }
        let total = self.s0 + self.i0 + self.r0;
        if (total - self.population).abs() > 1e-9 * self.population {
            return Err(Error::config(
                "initial_state",
                format!("s0 + i0 + r0 = {total} but population = {}", self.population),
            ));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> [f64; 3] {
        [self.s0, self.i0, self.r0]
    }
}

/// Integrated S/I/R series on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SirTrajectory {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl SirTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest absolute deviation of `s + i + r` from `population`.
    pub fn max_mass_error(&self, population: f64) -> f64 {
        self.s
            .iter()
            .zip(&self.i)
            .zip(&self.r)
            .map(|((s, i), r)| (s + i + r - population).abs())
            .fold(0.0, f64::max)
    }
}

/// Contact term `beta * s * i / n`.
#[inline]
pub fn transmission(beta: f64, s: f64, i: f64, population: f64) -> f64 {
    beta * s * i / population
}

pub fn sir_derivatives(state: [f64; 3], params: &SirParams) -> Result<[f64; 3]> {
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite SIR state {state:?}")));
    }
    if params.population <= 0.0 {
        return Err(Error::config("population", "must be positive"));
    }
    Ok(derivatives(state, params))
}

#[inline]
fn derivatives(state: [f64; 3], params: &SirParams) -> [f64; 3] {
    let [s, i, _] = state;
    let infections = transmission(params.beta, s, i, params.population);
    let recoveries = params.gamma * i;
    [-infections, infections - recoveries, recoveries]
}

/// One classical fourth-order Runge-Kutta step over an arbitrary state
/// vector. `scratch` must hold at least `5 * state.len()` values.
pub fn rk4_step<F>(state: &mut [f64], dt: f64, scratch: &mut [f64], mut f: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = state.len();
    let (k1, rest) = scratch.split_at_mut(n);
    let (k2, rest) = rest.split_at_mut(n);
    let (k3, rest) = rest.split_at_mut(n);
    let (k4, rest) = rest.split_at_mut(n);
    let stage = &mut rest[..n];

    f(state, k1);
    for j in 0..n {
        stage[j] = state[j] + 0.5 * dt * k1[j];
    }
    f(stage, k2);
    for j in 0..n {
        stage[j] = state[j] + 0.5 * dt * k2[j];
    }
    f(stage, k3);
    for j in 0..n {
        stage[j] = state[j] + dt * k3[j];
    }
    f(stage, k4);
    for j in 0..n {
        state[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

/// Number of whole steps of size `dt` that fit in `horizon`.
pub fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("dt", "must be positive"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::config("horizon_days", "must be positive"));
    }
    if dt > horizon {
        return Err(Error::config("dt", "must not exceed the horizon"));
    }
    // Absorb representation error such as 300 / 0.1 = 2999.9999...
    Ok((horizon / dt + 1e-9).floor() as usize)
}

/// Fixed-step RK4 integration from `t = 0` to `horizon_days`.
pub fn integrate_sir(params: &SirParams, horizon_days: f64, dt: f64) -> Result<SirTrajectory> {
    params.validate()?;
    let steps = steps_for(horizon_days, dt)?;
    let mut traj = SirTrajectory {
        times: Vec::with_capacity(steps + 1),
        s: Vec::with_capacity(steps + 1),
        i: Vec::with_capacity(steps + 1),
        r: Vec::with_capacity(steps + 1),
    };
    let mut state = params.initial_state();
    let mut scratch = [0.0; 15];
    for k in 0..=steps {
        if k > 0 {
            rk4_step(&mut state, dt, &mut scratch, |x, dx| {
                let d = derivatives([x[0], x[1], x[2]], params);
                dx.copy_from_slice(&d);
            });
        }
        traj.times.push(k as f64 * dt);
        traj.s.push(state[0]);
        traj.i.push(state[1]);
        traj.r.push(state[2]);
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState("SIR integration diverged".into()));
    }
    Ok(traj)
}

pub fn basic_reproduction_number(params: &SirParams) -> Result<f64> {
    if params.gamma == 0.0 {
        return Err(Error::DivisionByZero("recovery rate gamma is zero"));
    }
    Ok(params.beta / params.gamma)
}
