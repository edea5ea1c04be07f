//! Dataset CSV files.
//!
//! The first record is `t,<t₁>,…,<t_p>` (the grid); every following record
//! is `path_<k>,<x(t₁)>,…,<x(t_p)>`. Values are written in shortest
//! round-trip form, so reading a written file reproduces it exactly.

use std::fs::{self, File};
use std::path::Path;

use fcca_core::{FunctionalDataset, Grid};
use nalgebra::DMatrix;

use crate::error::CliError;

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64, CliError> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::format(path, format!("line {line}: `{field}` is not a finite number")))
}

pub fn read_dataset(path: &Path) -> Result<FunctionalDataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| CliError::format(path, e.to_string()))?,
        None => return Err(CliError::format(path, "empty file")),
    };
    if header.get(0).map(str::trim) != Some("t") {
        return Err(CliError::format(path, "first line must start with `t`"));
    }
    let points = header
        .iter()
        .skip(1)
        .map(|f| parse_field(path, 1, f))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = Grid::from_points(points).map_err(|e| CliError::format(path, e.to_string()))?;

    let p = grid.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::format(path, e.to_string()))?;
        if record.len() != p + 1 {
            return Err(CliError::format(
                path,
                format!("line {line}: expected {} fields, found {}", p + 1, record.len()),
            ));
        }
        for field in record.iter().skip(1) {
            values.push(parse_field(path, line, field)?);
        }
        n += 1;
    }
    let matrix = DMatrix::from_row_slice(n, p, &values);
    Ok(FunctionalDataset::new(matrix, grid)?)
}

pub fn dataset_to_csv(ds: &FunctionalDataset) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header = std::iter::once("t".to_string()).chain(ds.grid().points().iter().map(f64::to_string));
    writer.write_record(header).expect("writing to memory");
    for (k, row) in ds.values().row_iter().enumerate() {
        let record = std::iter::once(format!("path_{}", k + 1)).chain(row.iter().map(f64::to_string));
        writer.write_record(record).expect("writing to memory");
    }
    writer.into_inner().expect("writing to memory")
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_dataset(path: &Path, ds: &FunctionalDataset) -> Result<(), CliError> {
    write_bytes(path, &dataset_to_csv(ds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let grid = Grid::midpoint(3);
        let values = DMatrix::from_row_slice(2, 3, &[0.1, -2.5e-17, 1.0 / 3.0, 7.0, 1e300, -0.0]);
        let ds = FunctionalDataset::new(values, grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_dataset(&path, &ds).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,0.16666666666666666,0.5,0.8333333333333334\npath_1,"));
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.values(), ds.values());
        assert_eq!(back.grid(), ds.grid());
    }

    #[test]
    fn malformed_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("nohead.csv", "x,0.25,0.75\npath_1,1,2\npath_2,3,4\n"),
            ("short.csv", "t,0.25,0.75\npath_1,1\npath_2,3,4\n"),
            ("nan.csv", "t,0.25,0.75\npath_1,1,abc\npath_2,3,4\n"),
        ];
        for (name, body) in cases {
            let path = dir.path().join(name);
            fs::write(&path, body).unwrap();
            let err = read_dataset(&path).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::EXIT_DATA, "{name}: {err}");
        }
        let err = read_dataset(&dir.path().join("missing.csv")).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_IO);
    }
}
