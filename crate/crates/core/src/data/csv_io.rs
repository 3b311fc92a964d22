use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::types::{check_unique_ids, FeatureMatrix, LabelVector, SampleId};

/// Read a feature table with a designated id column and optional label column.
///
/// Labels are re-encoded densely to `0..k`. When every label parses as a
/// number the classes are ordered numerically, otherwise lexicographically.
pub fn load_csv(
    path: impl AsRef<Path>,
    id_column: &str,
    label_column: Option<&str>,
) -> Result<(FeatureMatrix, Option<LabelVector>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv { path: path.to_owned(), message: e.to_string() };

    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let id_pos = header
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| Error::Csv { path: path.to_owned(), message: format!("missing id column '{id_column}'") })?;
    let label_pos =
        match label_column {
            Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
                path: path.to_owned(),
                message: format!("missing label column '{name}'"),
            })?),
            None => None,
        };
    let feature_pos: Vec<usize> = (0..header.len()).filter(|&i| i != id_pos && Some(i) != label_pos).collect();
    if feature_pos.is_empty() {
        return Err(Error::Csv { path: path.to_owned(), message: "no feature columns".into() });
    }

    let mut ids = Vec::new();
    let mut raw_labels = Vec::new();
    let mut values = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // 1-based data row, header excluded
        let row = row_no + 1;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_owned(),
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        ids.push(SampleId(record[id_pos].to_owned()));
        if let Some(lp) = label_pos {
            let cell = record[lp].trim();
            if cell.is_empty() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    row,
                    column: header[lp].clone(),
                    message: "missing label".into(),
                });
            }
            raw_labels.push(cell.to_owned());
        }
        for &fp in &feature_pos {
            let cell = record[fp].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                row,
                column: header[fp].clone(),
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    row,
                    column: header[fp].clone(),
                    message: format!("non-finite value '{cell}'"),
                });
            }
            values.push(v);
        }
    }
    if ids.is_empty() {
        return Err(Error::Csv { path: path.to_owned(), message: "no data rows".into() });
    }
    check_unique_ids(&ids)?;

    let cols: Vec<String> = feature_pos.iter().map(|&i| header[i].clone()).collect();
    let matrix = Matrix::from_vec(ids.len(), cols.len(), values)?;
    let labels = if label_pos.is_some() { Some(encode_labels(&ids, &raw_labels)?) } else { None };
    Ok((FeatureMatrix::new(ids, cols, matrix)?, labels))
}

fn encode_labels(ids: &[SampleId], raw: &[String]) -> Result<LabelVector> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    let classes: Vec<String> = match numeric {
        Some(nums) => {
            let mut uniq: Vec<(f64, String)> = nums.into_iter().zip(raw.iter().cloned()).collect();
            uniq.sort_by(|a, b| a.0.total_cmp(&b.0));
            uniq.dedup_by(|a, b| a.0 == b.0);
            uniq.into_iter().map(|(_, s)| s).collect()
        }
        None => raw.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let encoded = raw
        .iter()
        .map(|s| match s.parse::<f64>() {
            Ok(v) => classes.iter().position(|c| c.parse::<f64>().ok() == Some(v)),
            Err(_) => classes.iter().position(|c| c == s),
        })
        .map(|o| o.expect("every label has a class"))
        .collect();
    LabelVector::new(ids.to_vec(), encoded, classes.len())
}

/// Write a feature table (and optional labels) in the format [`load_csv`] reads.
/// Values use the shortest representation that round-trips exactly.
pub fn write_csv(
    path: impl AsRef<Path>,
    features: &FeatureMatrix,
    id_column: &str,
    labels: Option<(&str, &LabelVector)>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some((_, l)) = labels {
        if !l.aligned_with(features) {
            return Err(Error::Schema("labels are not aligned with feature rows".into()));
        }
    }
    let mut w =
        csv::Writer::from_path(path).map_err(|e| Error::Csv { path: path.to_owned(), message: e.to_string() })?;
    let csv_err = |e: csv::Error| Error::Csv { path: path.to_owned(), message: e.to_string() };
    let mut header = vec![id_column.to_owned()];
    header.extend(features.columns().iter().cloned());
    if let Some((name, _)) = labels {
        header.push(name.to_owned());
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, id) in features.ids().iter().enumerate() {
        let mut rec = vec![id.0.clone()];
        rec.extend(features.values().row(i).iter().map(|v| format!("{v:?}")));
        if let Some((_, l)) = labels {
            rec.push(l.labels()[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
