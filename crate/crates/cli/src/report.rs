//! `podl report`: the accuracy-growth series from a run's `metrics.csv`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("metrics file lacks column {0:?}")]
    MissingColumn(&'static str),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthRow {
    pub block: u64,
    pub epochs_elapsed: u64,
    pub accuracy: String,
    pub accuracy_f64: f64,
}

pub fn read_growth(path: &Path) -> Result<Vec<GrowthRow>, ReportError> {
    let io = |e: &dyn std::fmt::Display| ReportError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io(&e))?;
    let headers = rdr.headers().map_err(|e| io(&e))?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let col = |name: &'static str| index.get(name).copied().ok_or(ReportError::MissingColumn(name));
    let (h, e, c, a) = (col("height")?, col("epochs_elapsed")?, col("claimed_accuracy")?, col("accuracy")?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io(&e))?;
        let parse_err = |m: String| ReportError::Parse { row: i + 1, message: m };
        let field = |k: usize| rec.get(k).ok_or_else(|| parse_err(format!("missing field {k}")));
        rows.push(GrowthRow {
            block: field(h)?.parse().map_err(|x| parse_err(format!("height: {x}")))?,
            epochs_elapsed: field(e)?.parse().map_err(|x| parse_err(format!("epochs_elapsed: {x}")))?,
            accuracy: field(c)?.to_string(),
            accuracy_f64: field(a)?.parse().map_err(|x| parse_err(format!("accuracy: {x}")))?,
        });
    }
    Ok(rows)
}

pub fn write_growth<W: Write>(out: W, rows: &[GrowthRow]) -> Result<(), ReportError> {
    let io = |e: &dyn std::fmt::Display| ReportError::Io { path: "<output>".into(), message: e.to_string() };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["block", "epochs_elapsed", "accuracy", "accuracy_f64"]).map_err(|e| io(&e))?;
    for r in rows {
        w.write_record([r.block.to_string(), r.epochs_elapsed.to_string(), r.accuracy.clone(), r.accuracy_f64.to_string()])
            .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}
