use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DlError;
use crate::chain::codec::Encoder;
use crate::chain::{hash_bytes, Digest};

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: u32,
}

/// An ordered, non-empty list of records. Order is part of identity because
/// SGD is order-sensitive.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    input_dim: usize,
    num_classes: usize,
    id: Digest,
}

/// JSON sidecar stored next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub input_dim: usize,
    pub num_classes: usize,
    pub records: usize,
    pub dataset_id: Digest,
}

impl Dataset {
    pub fn new(records: Vec<Record>, input_dim: usize, num_classes: usize) -> Result<Self, DlError> {
        if records.is_empty() {
            return Err(DlError::EmptyDataset);
        }
        if input_dim == 0 || num_classes < 2 {
            return Err(DlError::BadDataset(format!("input_dim {input_dim}, num_classes {num_classes}")));
        }
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != input_dim {
                return Err(DlError::BadDataset(format!(
                    "record {i} has {} features, expected {input_dim}",
                    r.features.len()
                )));
            }
            if r.label as usize >= num_classes {
                return Err(DlError::BadDataset(format!("record {i} label {} out of range", r.label)));
            }
            if r.features.iter().any(|x| !x.is_finite()) {
                return Err(DlError::BadDataset(format!("record {i} has a non-finite feature")));
            }
        }
        let id = Self::compute_id(&records, input_dim, num_classes);
        Ok(Dataset { records, input_dim, num_classes, id })
    }

    /// SHA-256 of: `input_dim u32, num_classes u32, count u64`, then per
    /// record its features as f64 LE bit patterns and its label as u32.
    fn compute_id(records: &[Record], input_dim: usize, num_classes: usize) -> Digest {
        let mut enc = Encoder::with_capacity(16 + records.len() * (input_dim * 8 + 4));
        enc.u32(input_dim as u32).u32(num_classes as u32).u64(records.len() as u64);
        for r in records {
            for &x in &r.features {
                enc.f64(x);
            }
            enc.u32(r.label);
        }
        hash_bytes(&enc.finish())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn id(&self) -> Digest {
        self.id
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            input_dim: self.input_dim,
            num_classes: self.num_classes,
            records: self.records.len(),
            dataset_id: self.id,
        }
    }

    /// The first `n` records as their own dataset.
    pub fn prefix(&self, n: usize) -> Result<Dataset, DlError> {
        if n > self.records.len() {
            return Err(DlError::BadDataset(format!("prefix {n} longer than {} records", self.records.len())));
        }
        Dataset::new(self.records[..n].to_vec(), self.input_dim, self.num_classes)
    }

    /// Records after the first `n`.
    pub fn suffix_from(&self, n: usize) -> Result<Dataset, DlError> {
        Dataset::new(self.records.get(n..).unwrap_or_default().to_vec(), self.input_dim, self.num_classes)
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for r in &self.records {
            counts[r.label as usize] += 1;
        }
        counts
    }

    /// Writes `<dir>/<name>.csv` (features then label per row, no header) and
    /// `<dir>/<name>.json` (the [`DatasetMeta`] sidecar).
    pub fn save(&self, dir: &Path, name: &str) -> Result<PathBuf, DlError> {
        let io = |e: &dyn std::fmt::Display| DlError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
        let csv_path = dir.join(format!("{name}.csv"));
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&csv_path).map_err(|e| io(&e))?;
        let mut row: Vec<String> = Vec::with_capacity(self.input_dim + 1);
        for r in &self.records {
            row.clear();
            // `{}` on f64 prints the shortest string that parses back exactly.
            row.extend(r.features.iter().map(|x| x.to_string()));
            row.push(r.label.to_string());
            w.write_record(&row).map_err(|e| io(&e))?;
        }
        w.flush().map_err(|e| io(&e))?;
        let meta = serde_json::to_vec_pretty(&self.meta()).map_err(|e| io(&e))?;
        std::fs::write(dir.join(format!("{name}.json")), meta).map_err(|e| io(&e))?;
        Ok(csv_path)
    }

    /// Loads a CSV + sidecar pair and checks the recomputed id against the
    /// sidecar. `path` may name either file.
    pub fn load(path: &Path) -> Result<Dataset, DlError> {
        let io = |e: &dyn std::fmt::Display| DlError::Io(format!("{}: {e}", path.display()));
        let meta_path = path.with_extension("json");
        let csv_path = path.with_extension("csv");
        let meta: DatasetMeta =
            serde_json::from_slice(&std::fs::read(&meta_path).map_err(|e| io(&e))?).map_err(|e| io(&e))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(&csv_path).map_err(|e| io(&e))?;
        let mut records = Vec::with_capacity(meta.records);
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| io(&e))?;
            if row.len() != meta.input_dim + 1 {
                return Err(DlError::BadDataset(format!("row {i} has {} columns", row.len())));
            }
            let mut features = Vec::with_capacity(meta.input_dim);
            for cell in row.iter().take(meta.input_dim) {
                features.push(cell.parse::<f64>().map_err(|e| DlError::BadDataset(format!("row {i}: {e}")))?);
            }
            let label = row[meta.input_dim].parse::<u32>().map_err(|e| DlError::BadDataset(format!("row {i}: {e}")))?;
            records.push(Record { features, label });
        }
        let ds = Dataset::new(records, meta.input_dim, meta.num_classes)?;
        if ds.id != meta.dataset_id {
            return Err(DlError::BadDataset(format!(
                "{}: content hash {} does not match sidecar id {}",
                csv_path.display(),
                ds.id,
                meta.dataset_id
            )));
        }
        Ok(ds)
    }
}
