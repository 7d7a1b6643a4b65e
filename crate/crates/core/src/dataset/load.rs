use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{FeatureMeta, SurvivalDataset, SurvivalOutcome};
use crate::error::{Result, SurvError};

const TIME: &str = "time";
const STATUS: &str = "status";
const ID: &str = "id";

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Load a dataset CSV and, optionally, a `name,block,mandatory` metadata CSV.
pub fn load_dataset(data_path: &Path, meta_path: Option<&Path>) -> Result<SurvivalDataset> {
    let meta = match meta_path {
        Some(p) => Some(read_metadata(File::open(p)?)?),
        None => None,
    };
    read_dataset(File::open(data_path)?, meta.as_deref())
}

pub fn read_metadata<R: Read>(reader: R) -> Result<Vec<FeatureMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SurvError::MissingColumn(name.to_string()))
    };
    let (name_col, block_col, mand_col) = (col("name")?, col("block")?, col("mandatory")?);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mandatory = match rec.get(mand_col).unwrap_or("") {
            "0" => false,
            "1" => true,
            other => {
                return Err(SurvError::InvalidCell {
                    column: "mandatory".into(),
                    row,
                    value: other.into(),
                })
            }
        };
        out.push(FeatureMeta {
            name: rec.get(name_col).unwrap_or("").to_string(),
            block: rec.get(block_col).unwrap_or("").to_string(),
            mandatory,
            scale: None,
            constant: false,
        });
    }
    Ok(out)
}

pub fn read_dataset<R: Read>(reader: R, meta: Option<&[FeatureMeta]>) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let time_col = find(TIME).ok_or_else(|| SurvError::MissingColumn(TIME.into()))?;
    let status_col = find(STATUS).ok_or_else(|| SurvError::MissingColumn(STATUS.into()))?;
    let id_col = find(ID);
    let cov_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != time_col && c != status_col && Some(c) != id_col)
        .collect();

    let meta_by_name: HashMap<&str, &FeatureMeta> = meta
        .unwrap_or(&[])
        .iter()
        .map(|m| (m.name.as_str(), m))
        .collect();
    let features: Vec<FeatureMeta> = cov_cols
        .iter()
        .map(|&c| match meta_by_name.get(headers[c].as_str()) {
            Some(m) => (*m).clone(),
            None => FeatureMeta::new(headers[c].clone()),
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let bad = |c: usize| SurvError::InvalidCell {
            column: headers[c].clone(),
            row,
            value: cell(c).to_string(),
        };
        let time: f64 = cell(time_col).parse().map_err(|_| bad(time_col))?;
        if !time.is_finite() || time < 0.0 {
            return Err(bad(time_col));
        }
        let event = match cell(status_col) {
            "0" => false,
            "1" => true,
            _ => return Err(bad(status_col)),
        };
        outcomes.push(SurvivalOutcome { time, event });
        for &c in &cov_cols {
            let s = cell(c);
            let v = if is_missing(s) {
                f64::NAN
            } else {
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => return Err(bad(c)),
                }
            };
            values.push(v);
        }
    }
    let x = DMatrix::from_row_slice(outcomes.len(), cov_cols.len(), &values);
    SurvivalDataset::new(outcomes, x, features)
}

/// Write the dataset back as CSV (`time,status,<features>`), missing cells as `NA`.
pub fn write_dataset<W: Write>(ds: &SurvivalDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![TIME.to_string(), STATUS.to_string()];
    header.extend(ds.feature_names());
    w.write_record(&header)?;
    for (i, o) in ds.outcomes().iter().enumerate() {
        let mut rec = vec![o.time.to_string(), if o.event { "1" } else { "0" }.to_string()];
        rec.extend(ds.covariates().row(i).iter().map(|v| {
            if v.is_nan() {
                "NA".to_string()
            } else {
                v.to_string()
            }
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
