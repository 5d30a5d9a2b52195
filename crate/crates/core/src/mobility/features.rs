use std::collections::BTreeMap;

use crate::{Error, Result};

/// Element-wise mean of each region's item embeddings.
pub fn aggregate_node_features(
    per_item: &BTreeMap<String, Vec<Vec<f64>>>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut dim = None;
    let mut out = BTreeMap::new();
    for (id, items) in per_item {
        let Some(first) = items.first() else {
            return Err(Error::Data(format!("region `{id}` has no embeddings")));
        };
        let f = *dim.get_or_insert(first.len());
        let mut mean = vec![0.0; f];
        for v in items {
            if v.len() != f {
                return Err(Error::Data(format!(
                    "region `{id}`: embedding of length {} where {f} expected",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("region `{id}`: non-finite embedding")));
            }
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        let count = items.len() as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        out.insert(id.clone(), mean);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(entries: &[(&str, Vec<Vec<f64>>)]) -> BTreeMap<String, Vec<Vec<f64>>> {
        entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn single_vector_unchanged() {
        let out = aggregate_node_features(&map(&[("a", vec![vec![0.3, -1.7, 2.0]])])).unwrap();
        assert_eq!(out["a"], vec![0.3, -1.7, 2.0]);
    }

    #[test]
    fn mean_of_two() {
        let out = aggregate_node_features(&map(&[("a", vec![vec![1.0, 1.0], vec![3.0, 3.0]])])).unwrap();
        assert_eq!(out["a"], vec![2.0, 2.0]);
    }

    #[test]
    fn opposite_vectors_cancel() {
        let v = vec![0.25, -4.0, 7.5];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let out = aggregate_node_features(&map(&[("a", vec![v, neg])])).unwrap();
        assert_eq!(out["a"], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_region_is_named() {
        let err = aggregate_node_features(&map(&[("a", vec![vec![1.0]]), ("lonely", vec![])])).unwrap_err();
        assert!(err.to_string().contains("lonely"));
    }

    #[test]
    fn ragged_dimensions_rejected() {
        assert!(aggregate_node_features(&map(&[("a", vec![vec![1.0]]), ("b", vec![vec![1.0, 2.0]])])).is_err());
    }
}
