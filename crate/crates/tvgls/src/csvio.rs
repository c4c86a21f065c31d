//! Small CSV layer: comma separated, header required, '.' decimal point,
//! floats printed with 17 significant digits so values round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Serialize one float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column delimiter for the table writers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Tsv,
}

impl OutputFormat {
    pub fn delimiter(&self) -> char {
        match self {
            OutputFormat::Csv => ',',
            OutputFormat::Tsv => '\t',
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Tsv => "tsv",
        }
    }
}

/// Write a delimited table with a header row.
pub fn write_table(
    path: &Path,
    format: OutputFormat,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    let delim = format.delimiter();
    let mut out = String::new();
    out.push_str(&header.join(&delim.to_string()));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(&delim.to_string()));
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A parsed data file: the opaque period labels from the first column and
/// one numeric row per period.
#[derive(Debug, Clone)]
pub struct DataFile {
    pub labels: Vec<String>,
    pub rows: Vec<DVector<f64>>,
    pub column_names: Vec<String>,
}

/// Read a data file: header required; first column is an opaque period
/// label, the remaining columns are the observed variables. Errors carry
/// 1-based line numbers.
pub fn read_data_csv(path: &Path) -> Result<DataFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Input {
        line: 1,
        message: "file is empty; a header row is required".into(),
    })?;
    let header_fields: Vec<&str> = header.split(',').collect();
    if header_fields.len() < 2 {
        return Err(Error::Input {
            line: 1,
            message: format!(
                "header has {} column(s); need a period column plus data columns",
                header_fields.len()
            ),
        });
    }
    let width = header_fields.len() - 1;
    let column_names = header_fields[1..].iter().map(|s| s.trim().to_string()).collect();

    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width + 1 {
            return Err(Error::Input {
                line: line_no,
                message: format!(
                    "row has {} column(s), expected {}",
                    fields.len(),
                    width + 1
                ),
            });
        }
        labels.push(fields[0].trim().to_string());
        let mut row = DVector::zeros(width);
        for (j, field) in fields[1..].iter().enumerate() {
            row[j] = field.trim().parse::<f64>().map_err(|_| Error::Input {
                line: line_no,
                message: format!("cannot parse '{}' as a number", field.trim()),
            })?;
            if !row[j].is_finite() {
                return Err(Error::Input {
                    line: line_no,
                    message: format!("non-finite value '{}'", field.trim()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input {
            line: 2,
            message: "no data rows found".into(),
        });
    }
    Ok(DataFile {
        labels,
        rows,
        column_names,
    })
}
