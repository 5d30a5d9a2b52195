//! File formats for every pipeline artifact.
//!
//! Writers go through [`write_atomic`], so a failed stage never leaves a
//! partially written file behind.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::Metrics;
use crate::mobility::{aggregate_node_features, MobilityGraph, Region};
use crate::model::{AblationRow, DatasetSplit, EpochRecord};
use crate::sir::{Calibration, CaseSeries, RiskLabel, RiskLevel};
use crate::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile(path.to_path_buf())),
        Err(e) => Err(io_err(path)(e)),
    }
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn csv_reader(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let text = read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let head = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((head, rows))
}

fn expect_header(path: &Path, got: &[String], want: &[&str]) -> Result<()> {
    if got.len() < want.len() || got.iter().zip(want).any(|(a, b)| a != b) {
        return Err(Error::Data(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(path: &Path, line: usize, field: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| {
        Error::Data(format!(
            "{} line {}: cannot parse `{field}` from `{raw}`",
            path.display(),
            line + 2
        ))
    })
}

// regions.csv: region_id,population,x_m,y_m

pub fn write_regions_csv(path: &Path, regions: &[Region]) -> Result<()> {
    let rows = regions.iter().map(|r| {
        vec![
            r.id.clone(),
            r.population.to_string(),
            r.x_m.to_string(),
            r.y_m.to_string(),
        ]
    });
    write_atomic(path, &csv_bytes(&header(&["region_id", "population", "x_m", "y_m"]), rows)?)
}

/// Regions without features.
pub fn read_regions_csv(path: &Path) -> Result<Vec<Region>> {
    let (head, rows) = csv_reader(path)?;
    expect_header(path, &head, &["region_id", "population", "x_m", "y_m"])?;
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            Ok(Region {
                id: r[0].to_string(),
                population: parse(path, k, "population", &r[1])?,
                x_m: parse(path, k, "x_m", &r[2])?,
                y_m: parse(path, k, "y_m", &r[3])?,
                features: Vec::new(),
            })
        })
        .collect()
}

// features.csv: region_id,f0,...   or   region_id,item_id,f0,...

pub fn write_features_csv(path: &Path, regions: &[Region]) -> Result<()> {
    let dim = regions.first().map_or(0, |r| r.features.len());
    let mut head = vec!["region_id".to_string()];
    head.extend((0..dim).map(|j| format!("f{j}")));
    let rows = regions.iter().map(|r| {
        let mut row = vec![r.id.clone()];
        row.extend(r.features.iter().map(f64::to_string));
        row
    });
    write_atomic(path, &csv_bytes(&head, rows)?)
}

/// Per-region feature vectors. Files with an `item_id` column are
/// averaged per region.
pub fn read_features_csv(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let (head, rows) = csv_reader(path)?;
    if head.first().map(String::as_str) != Some("region_id") {
        return Err(Error::Data(format!("{}: first column must be region_id", path.display())));
    }
    let per_item = head.get(1).map(String::as_str) == Some("item_id");
    let first_feature = if per_item { 2 } else { 1 };
    for (j, name) in head[first_feature..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(Error::Data(format!("{}: unexpected column `{name}`", path.display())));
        }
    }
    let mut grouped: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (k, r) in rows.iter().enumerate() {
        let values = (first_feature..r.len())
            .map(|j| parse(path, k, &head[j], &r[j]))
            .collect::<Result<Vec<f64>>>()?;
        let entry = grouped.entry(r[0].to_string()).or_default();
        if !per_item && !entry.is_empty() {
            return Err(Error::Data(format!("{}: region `{}` listed twice", path.display(), &r[0])));
        }
        entry.push(values);
    }
    aggregate_node_features(&grouped)
}

/// Attaches features to regions in region order.
pub fn join_features(regions: &mut [Region], features: &BTreeMap<String, Vec<f64>>) -> Result<()> {
    for r in regions.iter_mut() {
        r.features = features
            .get(&r.id)
            .ok_or_else(|| Error::Data(format!("no features for region `{}`", r.id)))?
            .clone();
    }
    Ok(())
}

// cases.csv: region_id,day,cumulative_cases

pub fn write_cases_csv(path: &Path, cases: &[CaseSeries]) -> Result<()> {
    let rows = cases.iter().flat_map(|s| {
        s.days
            .iter()
            .zip(&s.cumulative_cases)
            .map(|(d, c)| vec![s.region_id.clone(), d.to_string(), c.to_string()])
    });
    write_atomic(path, &csv_bytes(&header(&["region_id", "day", "cumulative_cases"]), rows)?)
}

/// Series grouped by region in order of first appearance.
pub fn read_cases_csv(path: &Path) -> Result<Vec<CaseSeries>> {
    let (head, rows) = csv_reader(path)?;
    expect_header(path, &head, &["region_id", "day", "cumulative_cases"])?;
    let mut order: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<CaseSeries> = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        let day: u32 = parse(path, k, "day", &r[1])?;
        let cases: f64 = parse(path, k, "cumulative_cases", &r[2])?;
        let idx = *order.entry(r[0].to_string()).or_insert_with(|| {
            out.push(CaseSeries {
                region_id: r[0].to_string(),
                days: Vec::new(),
                cumulative_cases: Vec::new(),
            });
            out.len() - 1
        });
        out[idx].days.push(day);
        out[idx].cumulative_cases.push(cases);
    }
    Ok(out)
}

// r0.csv: region_id,beta,gamma,r0,loss,clamped

pub fn write_r0_csv(path: &Path, ids: &[String], fits: &[Calibration]) -> Result<()> {
    let rows = ids.iter().zip(fits).map(|(id, f)| {
        vec![
            id.clone(),
            f.params.beta.to_string(),
            f.params.gamma.to_string(),
            f.r0.to_string(),
            f.loss.to_string(),
            f.clamped.to_string(),
        ]
    });
    write_atomic(
        path,
        &csv_bytes(&header(&["region_id", "beta", "gamma", "r0", "loss", "clamped"]), rows)?,
    )
}

/// `(region_id, r0)` pairs.
pub fn read_r0_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let (head, rows) = csv_reader(path)?;
    expect_header(path, &head, &["region_id", "beta", "gamma", "r0"])?;
    rows.iter()
        .enumerate()
        .map(|(k, r)| Ok((r[0].to_string(), parse(path, k, "r0", &r[3])?)))
        .collect()
}

// labels.csv: region_id,r0,label

pub fn write_labels_csv(path: &Path, labels: &[RiskLabel]) -> Result<()> {
    let rows = labels
        .iter()
        .map(|l| vec![l.region_id.clone(), l.r0.to_string(), l.label.index().to_string()]);
    write_atomic(path, &csv_bytes(&header(&["region_id", "r0", "label"]), rows)?)
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<RiskLabel>> {
    let (head, rows) = csv_reader(path)?;
    expect_header(path, &head, &["region_id", "r0", "label"])?;
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            let idx: usize = parse(path, k, "label", &r[2])?;
            Ok(RiskLabel {
                region_id: r[0].to_string(),
                r0: parse(path, k, "r0", &r[1])?,
                label: RiskLevel::from_index(idx)
                    .ok_or_else(|| Error::Data(format!("{}: label {idx} not in 0..=2", path.display())))?,
            })
        })
        .collect()
}

// split.json: {train:[ids], val:[ids], test:[ids], seed}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl SplitFile {
    pub fn from_split<S: AsRef<str>>(split: &DatasetSplit, ids: &[S]) -> Self {
        let names = |v: &[usize]| v.iter().map(|&i| ids[i].as_ref().to_string()).collect();
        Self {
            train: names(&split.train),
            val: names(&split.val),
            test: names(&split.test),
            seed: split.seed,
        }
    }

    pub fn to_split<S: AsRef<str>>(&self, ids: &[S]) -> Result<DatasetSplit> {
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(k, s)| (s.as_ref(), k)).collect();
        let lookup = |v: &[String]| {
            v.iter()
                .map(|id| {
                    index
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::Data(format!("split names unknown region `{id}`")))
                })
                .collect::<Result<Vec<usize>>>()
        };
        let split = DatasetSplit {
            train: lookup(&self.train)?,
            val: lookup(&self.val)?,
            test: lookup(&self.test)?,
            seed: self.seed,
        };
        split.validate(ids.len())?;
        Ok(split)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

pub fn write_graph_json(path: &Path, graph: &MobilityGraph) -> Result<()> {
    write_atomic(path, graph.to_json()?.as_bytes())
}

pub fn read_graph_json(path: &Path) -> Result<MobilityGraph> {
    MobilityGraph::from_json(&read_to_string(path)?)
}

// history.csv: epoch,train_loss,val_weighted_f1

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let rows = history.iter().map(|h| {
        vec![
            h.epoch.to_string(),
            h.train_loss.to_string(),
            h.val_weighted_f1.to_string(),
        ]
    });
    write_atomic(
        path,
        &csv_bytes(&header(&["epoch", "train_loss", "val_weighted_f1"]), rows)?,
    )
}

pub fn write_metrics_json(path: &Path, metrics: &Metrics) -> Result<()> {
    write_json(path, metrics)
}

pub fn write_ablation_json(path: &Path, rows: &[AblationRow]) -> Result<()> {
    write_json(path, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_reported() {
        let err = read_regions_csv(Path::new("/definitely/not/here.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn per_item_features_are_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("features.csv");
        fs::write(&p, "region_id,item_id,f0,f1\na,1,1,1\na,2,3,3\nb,1,0.5,-1\n").unwrap();
        let f = read_features_csv(&p).unwrap();
        assert_eq!(f["a"], vec![2.0, 2.0]);
        assert_eq!(f["b"], vec![0.5, -1.0]);
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cases.csv");
        fs::write(&p, "region,day,cases\n").unwrap();
        assert!(matches!(read_cases_csv(&p), Err(Error::Data(_))));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn cases_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cases.csv");
        let cases = vec![
            CaseSeries {
                region_id: "b".into(),
                days: vec![0, 1, 2],
                cumulative_cases: vec![1.0, 2.5, 1.0 / 3.0 + 3.0],
            },
            CaseSeries {
                region_id: "a".into(),
                days: vec![0, 1],
                cumulative_cases: vec![0.1, 0.2],
            },
        ];
        write_cases_csv(&p, &cases).unwrap();
        assert_eq!(read_cases_csv(&p).unwrap(), cases);
    }
}
