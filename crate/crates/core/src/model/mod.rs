//! Transmission-aware graph convolutional network.
//!
//! Node features are projected into susceptible, infectious and recovered
//! embeddings. Each layer then moves mass between them the way the SIR
//! equations move people: a transmission map on `[S | sum_w e_wv I_w]`
//! takes mass from `S` into `I`, and a recovery map takes mass from `I`
//! into `R`. The class distribution comes from `[S | I | R]`.

mod ablation;
mod config;
mod network;
mod split;
mod train;

pub use ablation::{mean_f1, run_ablations, AblationRow};
pub use config::{EpiGcnConfig, Variant};
pub use network::{message_edges, sir_message_pass, sir_project, Compartments, EpiGcn, Projection};
pub use split::DatasetSplit;
pub use train::{evaluate, train, EpochRecord, TrainOutcome};
