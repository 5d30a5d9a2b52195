use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::{Params, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "epirisk-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// JSON parameter file: `name -> {shape, values}` plus free-form metadata
/// that owners (such as the GCN) use for their configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub params: BTreeMap<String, ParamEntry>,
}

impl Checkpoint {
    pub fn from_params(params: &Params, meta: serde_json::Value) -> Self {
        let params = params
            .iter()
            .map(|(name, t)| {
                (
                    name.clone(),
                    ParamEntry {
                        shape: [t.rows(), t.cols()],
                        values: t.data().to_vec(),
                    },
                )
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            meta,
            params,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("unknown checkpoint format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    /// Parameters shaped exactly like `expected`; any missing, extra or
    /// reshaped entry is rejected.
    pub fn load_into(&self, expected: &Params) -> Result<Params> {
        let mut out = Params::new();
        for (name, t) in expected.iter() {
            let entry = self
                .params
                .get(name)
                .ok_or_else(|| Error::Data(format!("checkpoint lacks parameter `{name}`")))?;
            let [r, c] = entry.shape;
            if (r, c) != t.shape() {
                return Err(Error::Shape {
                    op: "checkpoint",
                    left: t.shape(),
                    right: (r, c),
                });
            }
            out.insert(name.clone(), Tensor::from_vec(r, c, entry.values.clone())?);
        }
        if let Some(extra) = self.params.keys().find(|k| expected.get(k).is_none()) {
            return Err(Error::Data(format!("checkpoint has unexpected parameter `{extra}`")));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Params {
        let mut p = Params::new();
        p.insert("a", Tensor::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 7.0]]).unwrap());
        p.insert("b", Tensor::from_rows(&[vec![std::f64::consts::PI]]).unwrap());
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let json = Checkpoint::from_params(&p, serde_json::json!({"k": 1})).to_json().unwrap();
        let back = Checkpoint::from_json(&json).unwrap().load_into(&p).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = sample();
        let ck = Checkpoint::from_params(&p, serde_json::Value::Null);
        let mut other = Params::new();
        other.insert("a", Tensor::zeros(1, 4));
        other.insert("b", Tensor::zeros(1, 1));
        assert!(matches!(ck.load_into(&other), Err(Error::Shape { .. })));
    }

    #[test]
    fn wrong_format_rejected() {
        let json = r#"{"format":"other","version":1,"params":{}}"#;
        assert!(Checkpoint::from_json(json).is_err());
    }
}
