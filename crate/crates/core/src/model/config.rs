use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// SIR message passing over gravity-normalised edges.
    Full,
    /// SIR message passing with uniform weights over the same neighbours.
    NoGravity,
    /// Mean-aggregation graph convolution without the S/I/R structure.
    VanillaMp,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoGravity, Variant::VanillaMp];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoGravity => "no_gravity",
            Variant::VanillaMp => "vanilla_mp",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::config("variant", format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpiGcnConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for EpiGcnConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            num_layers: 2,
            num_classes: 3,
            learning_rate: 1e-3,
            epochs: 300,
            seed: 0,
            variant: Variant::Full,
        }
    }
}

impl EpiGcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim < 1 {
            return Err(Error::config("model.hidden_dim", "must be at least 1"));
        }
        if self.num_layers < 1 {
            return Err(Error::config("model.num_layers", "must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("model.num_classes", "must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("model.learning_rate", "must be positive"));
        }
        Ok(())
    }
}
