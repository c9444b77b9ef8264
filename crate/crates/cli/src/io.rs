use std::fs;
use std::path::Path;

use slsir::numkit::Matrix;

use crate::error::CliError;

/// Named numeric table read from a CSV file with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub names: Vec<String>,
    pub data: Matrix,
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let where_ = path.display();
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{where_}: cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{where_}: empty header row")));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::Data(format!("{where_}: row {row}: {e}")))?;
        if record.len() != names.len() {
            return Err(CliError::Data(format!(
                "{where_}: row {row} has {} fields, header has {}",
                record.len(),
                names.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let bad = |what: &str| {
                CliError::Data(format!(
                    "{where_}: row {row}, column {} (`{}`): {what}",
                    c + 1,
                    names[c]
                ))
            };
            if field.is_empty() {
                return Err(bad("missing value"));
            }
            let v: f64 = field.parse().map_err(|_| bad(&format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad("non-finite value"));
            }
            columns[c].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(CliError::Data(format!("{where_}: no data rows")));
    }
    Ok(Table {
        names,
        data: Matrix::from_columns(&columns),
    })
}

/// Single-column response file.
pub fn read_response(path: &Path) -> Result<(String, Vec<f64>), CliError> {
    let t = read_table(path)?;
    if t.names.len() != 1 {
        return Err(CliError::Data(format!(
            "{}: response file must have exactly one column, found {}",
            path.display(),
            t.names.len()
        )));
    }
    Ok((t.names[0].clone(), t.data.col(0).to_vec()))
}

/// Removes columns with zero variance after centering. Returns the names
/// of the dropped columns.
pub fn drop_constant_columns(table: &mut Table, what: &str) -> Vec<String> {
    let keep: Vec<usize> = (0..table.names.len())
        .filter(|&j| {
            let col = table.data.col(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let spread = col.iter().fold(0.0_f64, |m, v| m.max((v - mean).abs()));
            spread > 1e-12 * mean.abs().max(1.0)
        })
        .collect();
    if keep.len() == table.names.len() {
        return Vec::new();
    }
    let dropped: Vec<String> = (0..table.names.len())
        .filter(|j| !keep.contains(j))
        .map(|j| table.names[j].clone())
        .collect();
    for name in &dropped {
        log::warn!("{what}: dropping constant column `{name}`");
    }
    let cols: Vec<Vec<f64>> = keep.iter().map(|&j| table.data.col(j).to_vec()).collect();
    table.names = keep.iter().map(|&j| table.names[j].clone()).collect();
    table.data = if cols.is_empty() {
        Matrix::zeros(table.data.rows(), 0)
    } else {
        Matrix::from_columns(&cols)
    };
    dropped
}

/// Decimal rendering with `digits` significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn opt_sig(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(String::new, |v| sig(v, digits))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    let wrap = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialise");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.123456, 3), "0.123");
        assert_eq!(sig(12.3456, 3), "12.3");
        assert_eq!(sig(1234.5, 3), "1234");
        assert_eq!(sig(-0.0001234, 3), "-0.000123");
        assert_eq!(sig(0.0, 3), "0.00");
        assert_eq!(sig(-1e-30, 3), "-0.00000000000000000000000000000100");
        let x = 0.1 + 0.2;
        assert_eq!(sig(x, 17).parse::<f64>().unwrap(), x);
    }
}
