//! Dataset export and import: `dataset.csv` (series_id, t, value) plus a
//! `dataset.json` sidecar with the generator settings and split assignment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use phasor_core::data::{generate, Dataset, DatasetLayout, Split, SeriesRecord};
use serde::{Deserialize, Serialize};

use crate::error::{LpmError, Result};
use crate::json::{self, fmt_f64, FORMAT_VERSION};

pub const CSV_NAME: &str = "dataset.csv";
pub const SIDECAR_NAME: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub name: String,
    pub layout: DatasetLayout,
    pub series: SplitIds,
    pub samples: SampleCounts,
}

fn ids(dataset: &Dataset, split: Split) -> Vec<usize> {
    dataset.series.iter().filter(|s| s.split == split).map(|s| s.id).collect()
}

pub fn sidecar(name: &str, dataset: &Dataset) -> Result<Sidecar> {
    let (train, val, test) = dataset.split()?.counts();
    Ok(Sidecar {
        format_version: FORMAT_VERSION,
        name: name.to_string(),
        layout: dataset.layout,
        series: SplitIds {
            train: ids(dataset, Split::Train),
            val: ids(dataset, Split::Val),
            test: ids(dataset, Split::Test),
        },
        samples: SampleCounts { train, val, test },
    })
}

pub fn csv_text(dataset: &Dataset) -> String {
    json::csv_string(
        &["series_id", "t", "value"],
        dataset.series.iter().flat_map(|s| {
            s.values
                .iter()
                .enumerate()
                .map(move |(t, v)| vec![s.id.to_string(), t.to_string(), fmt_f64(*v)])
        }),
    )
}

/// Writes both files into `dir` and returns their paths.
pub fn write(dir: &Path, name: &str, dataset: &Dataset) -> Result<(PathBuf, PathBuf)> {
    let csv_path = dir.join(CSV_NAME);
    let side_path = dir.join(SIDECAR_NAME);
    json::write_text(&csv_path, &csv_text(dataset))?;
    json::write(&side_path, &sidecar(name, dataset)?)?;
    Ok((csv_path, side_path))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| LpmError::format(path, format!("line {line}: bad {what} `{field}`")))
}

/// Reads a dataset written by [`write`]; noiseless references are regenerated from the sidecar.
pub fn read(dir: &Path) -> Result<(Sidecar, Dataset)> {
    let side_path = dir.join(SIDECAR_NAME);
    let side: Sidecar = json::read(&side_path)?;
    if side.format_version != FORMAT_VERSION {
        return Err(LpmError::Version {
            found: side.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let layout = side.layout;
    layout.gen.validate()?;

    let csv_path = dir.join(CSV_NAME);
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|source| LpmError::Csv {
        path: csv_path.clone(),
        source,
    })?;
    let header = reader
        .headers()
        .map_err(|source| LpmError::Csv { path: csv_path.clone(), source })?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["series_id", "t", "value"] {
        return Err(LpmError::format(&csv_path, "header must be series_id,t,value"));
    }
    let mut values: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|source| LpmError::Csv { path: csv_path.clone(), source })?;
        let line = i + 2;
        if rec.len() != 3 {
            return Err(LpmError::format(&csv_path, format!("line {line}: expected 3 fields")));
        }
        let id: usize = parse_field(&csv_path, line, &rec[0], "series_id")?;
        let t: usize = parse_field(&csv_path, line, &rec[1], "t")?;
        let v: f64 = parse_field(&csv_path, line, &rec[2], "value")?;
        if !v.is_finite() {
            return Err(LpmError::format(&csv_path, format!("line {line}: non-finite value")));
        }
        let series = values.entry(id).or_default();
        if t != series.len() {
            return Err(LpmError::format(
                &csv_path,
                format!("line {line}: series {id} expected t={} got t={t}", series.len()),
            ));
        }
        series.push(v);
    }
    if values.len() != layout.num_series() {
        return Err(LpmError::format(
            &csv_path,
            format!("expected {} series, found {}", layout.num_series(), values.len()),
        ));
    }
    let mut series = Vec::with_capacity(values.len());
    for (id, vals) in values {
        if id >= layout.num_series() || vals.len() != layout.gen.series_len {
            return Err(LpmError::format(
                &csv_path,
                format!("series {id} has {} values, expected {}", vals.len(), layout.gen.series_len),
            ));
        }
        let split = layout.split_of(id);
        let listed = match split {
            Split::Train => &side.series.train,
            Split::Val => &side.series.val,
            Split::Test => &side.series.test,
        };
        if !listed.contains(&id) {
            return Err(LpmError::format(&side_path, format!("series {id} is not listed in its split")));
        }
        let clean = generate(&layout.series_spec(id))?.clean;
        series.push(SeriesRecord { id, split, values: vals, clean });
    }
    Ok((side, Dataset { layout, series }))
}
