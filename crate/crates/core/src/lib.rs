//! Epidemic exposure risk inference on regional mobility graphs.
//!
//! The crate covers the whole pipeline:
//!
//! * [`sir`]: SIR dynamics, per-region calibration of `(beta, gamma)` from
//!   cumulative case curves, `R0 = beta / gamma` and three-level risk labels.
//! * [`mobility`]: gravity-model edge weights and the top-k mobility graph.
//! * [`autodiff`]: a small dense reverse-mode differentiation tape.
//! * [`model`]: the transmission-aware GCN with SIR-structured message
//!   passing, its training loop and the two ablation variants.
//! * [`synth`]: seeded synthetic scenarios with metapopulation coupling.
//! * [`metrics`]: support-weighted precision, recall and F1.
//! * [`pipeline`]: file-backed stages used by the `epirisk` binary.

pub mod autodiff;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mobility;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod sir;
pub mod synth;

pub use error::{Error, Result};
