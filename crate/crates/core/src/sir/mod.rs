//! SIR compartmental dynamics, calibration and risk labelling.

mod calibrate;
mod dynamics;
mod labels;

pub use calibrate::{calibrate_sir, CalibConfig, Calibration, CaseSeries};
pub use dynamics::{
    basic_reproduction_number, integrate_sir, rk4_step, sir_derivatives, steps_for, transmission,
    SirParams, SirTrajectory,
};
pub use labels::{categorize_r0, label_regions, Categorization, RiskLabel, RiskLevel, DEFAULT_K};
