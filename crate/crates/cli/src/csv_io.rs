//! CSV datasets: a header row, one column named `y` holding 0/1 labels and
//! numeric feature columns in order. Values are written in shortest
//! round-trip form, so save followed by load reproduces every bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rase_core::dataset::LabeledDataset;

use crate::error::CliError;

pub const LABEL_COLUMN: &str = "y";

/// Feature rows with optional labels, as read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub feature_names: Vec<String>,
    pub p: usize,
    pub features: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

impl CsvTable {
    pub fn n(&self) -> usize {
        if self.p == 0 {
            0
        } else {
            self.features.len() / self.p
        }
    }

    pub fn into_dataset(self, source: &str) -> Result<LabeledDataset, CliError> {
        let labels = self
            .labels
            .ok_or_else(|| CliError::Data(format!("{source}: no `{LABEL_COLUMN}` column")))?;
        LabeledDataset::new(self.features, self.p, labels).map_err(|e| CliError::Data(format!("{source}: {e}")))
    }
}

pub fn read_table(path: &Path) -> Result<CsvTable, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_table(&text, &path.display().to_string())
}

/// Parses CSV text; `source` names the input in error messages.
pub fn parse_table(text: &str, source: &str) -> Result<CsvTable, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| CliError::Data(format!("{source}: {e}")))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CliError::Data(format!("{source}: empty file")));
    }
    let label_pos = header.iter().position(|h| h == LABEL_COLUMN);
    if header.iter().filter(|h| *h == LABEL_COLUMN).count() > 1 {
        return Err(CliError::Data(format!("{source}: more than one `{LABEL_COLUMN}` column")));
    }
    let feature_names: Vec<String> =
        header.iter().enumerate().filter(|&(i, _)| Some(i) != label_pos).map(|(_, h)| h.to_string()).collect();
    let p = feature_names.len();
    if p == 0 {
        return Err(CliError::Data(format!("{source}: no feature columns")));
    }
    let mut features = Vec::new();
    let mut labels = label_pos.map(|_| Vec::new());
    for (r, record) in reader.records().enumerate() {
        // header is line 1
        let line = r + 2;
        let record = record.map_err(|e| CliError::Data(format!("{source}: line {line}: {e}")))?;
        if record.len() != header.len() {
            return Err(CliError::Data(format!(
                "{source}: line {line}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let name = &header[c];
            let value: f64 = field
                .parse()
                .map_err(|_| CliError::Data(format!("{source}: line {line}: column `{name}`: cannot parse {field:?}")))?;
            if !value.is_finite() {
                return Err(CliError::Data(format!("{source}: line {line}: column `{name}`: non-finite value")));
            }
            if Some(c) == label_pos {
                let label = match value {
                    v if v == 0.0 => 0,
                    v if v == 1.0 => 1,
                    _ => {
                        return Err(CliError::Data(format!("{source}: line {line}: label must be 0 or 1, found {field}")));
                    }
                };
                labels.as_mut().expect("label column present").push(label);
            } else {
                features.push(value);
            }
        }
    }
    if features.is_empty() {
        return Err(CliError::Data(format!("{source}: no data rows")));
    }
    Ok(CsvTable { feature_names, p, features, labels })
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset, CliError> {
    read_table(path)?.into_dataset(&path.display().to_string())
}

/// Shortest decimal string that parses back to exactly `v`.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// Features as `x1..xp` followed by the label column.
pub fn write_dataset<W: Write>(data: &LabeledDataset, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    header.push(LABEL_COLUMN.to_string());
    w.write_record(&header).map_err(io_err)?;
    let mut fields = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        fields.clear();
        fields.extend(data.row(i).iter().map(|&v| format_value(v)));
        fields.push(data.label(i).to_string());
        w.write_record(&fields).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

pub fn save_dataset(data: &LabeledDataset, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    write_dataset(data, std::io::BufWriter::new(file))
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}
