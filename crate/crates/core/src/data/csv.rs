//! CSV ingestion: header `y,x1,...,xd`, 1-based integer labels, real features.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample, Layout};
use crate::error::{DadaError, Result};

/// Per-column min-max mapping of raw features onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ColumnScaling {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in rows {
            for j in 0..d {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        ColumnScaling { min, max }
    }

    /// Maps one raw row; constant columns map to 0 and values outside the
    /// recorded range are clipped.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    (2.0 * (v - self.min[j]) / span - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn read_rows(path: &Path) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut reader = ::csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0).map(str::trim) != Some("y") || headers.len() < 2 {
        return Err(DadaError::Format(format!("CSV header must be y,x1,...,xd; got {:?}", headers)));
    }
    let d = headers.len() - 1;
    let (mut labels, mut rows) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let y: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| DadaError::Format(format!("line {line}: label {:?} is not a positive integer", &rec[0])))?;
        if y == 0 {
            return Err(DadaError::Format(format!("line {line}: labels are 1-based")));
        }
        let x = rec
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| DadaError::Format(format!("line {line}: non-numeric feature")))?;
        if x.len() != d {
            return Err(DadaError::Format(format!("line {line}: {} features, header has {d}", x.len())));
        }
        labels.push(y);
        rows.push(x);
    }
    if rows.is_empty() {
        return Err(DadaError::Format("CSV has no data rows".into()));
    }
    Ok((labels, rows))
}

fn build(labels: Vec<usize>, rows: Vec<Vec<f64>>, scaling: &ColumnScaling) -> Result<Dataset> {
    let d = rows[0].len();
    if scaling.min.len() != d || scaling.max.len() != d {
        return Err(DadaError::Dimension(format!("scaling covers {} columns, data has {d}", scaling.min.len())));
    }
    let k = labels.iter().copied().max().unwrap_or(0);
    let samples = labels.into_iter().zip(&rows).map(|(y, r)| LabeledSample { x: scaling.apply(r), y }).collect();
    Dataset::new(samples, k, Layout::Vector { dim: d })
}

/// Loads a CSV and fits the column scaling on it. The scaling is returned so
/// the caller can persist it next to its outputs.
pub fn load_csv(path: &Path) -> Result<(Dataset, ColumnScaling)> {
    let (labels, rows) = read_rows(path)?;
    let scaling = ColumnScaling::fit(&rows);
    Ok((build(labels, rows, &scaling)?, scaling))
}

/// Loads a CSV with a previously recorded scaling.
pub fn load_csv_with_scaling(path: &Path, scaling: &ColumnScaling) -> Result<Dataset> {
    let (labels, rows) = read_rows(path)?;
    build(labels, rows, scaling)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_scaling_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "y,x1,x2\n1,0.0,5\n2,10.0,5\n1,5.0,5\n").unwrap();
        let (d, s) = load_csv(&p).unwrap();
        assert_eq!(d.k(), 2);
        assert_eq!(d.labels(), vec![1, 2, 1]);
        let xs: Vec<Vec<f64>> = d.samples().iter().map(|s| s.x.clone()).collect();
        assert_eq!(xs, vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]]);

        let side = dir.path().join("d.scaling.json");
        s.save(&side).unwrap();
        let s2 = ColumnScaling::load(&side).unwrap();
        assert_eq!(s, s2);
        assert_eq!(load_csv_with_scaling(&p, &s2).unwrap(), d);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "label,x1\n1,0.0\n").unwrap();
        assert!(matches!(load_csv(&p), Err(DadaError::Format(_))));
        fs::write(&p, "y,x1\n0,0.0\n").unwrap();
        assert!(matches!(load_csv(&p), Err(DadaError::Format(_))));
        fs::write(&p, "y,x1\n1,abc\n").unwrap();
        assert!(matches!(load_csv(&p), Err(DadaError::Format(_))));
        fs::write(&p, "y,x1\n").unwrap();
        assert!(matches!(load_csv(&p), Err(DadaError::Format(_))));
    }
}
