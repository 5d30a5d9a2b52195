//! Dense reverse-mode differentiation for small graph networks.
//!
//! Values live in [`Tensor`]s (row-major `f64` matrices). A [`Tape`]
//! records each primitive as it runs; [`Tape::backward`] then walks the
//! record in reverse and returns the gradient of a scalar output with
//! respect to every node that requires one.

mod adam;
mod checkpoint;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, ParamEntry, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use tape::{Gradients, NeighborEdge, Tape, Var, PROB_FLOOR};
pub use tensor::{Params, Tensor};
