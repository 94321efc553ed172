//! Embedding matrix import/export.
//!
//! Two formats: CSV (one column per label, header row of rendered labels,
//! 17-significant-digit decimals) and JSON (label to coordinate array, column
//! order preserved). Both round-trip bit-identically.

use std::io::{Read, Write};

use htk_core::embed::EmbeddingMatrix;
use htk_core::grammar::{parse_label, Alphabet, HorizonLabel};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Json,
}

impl std::str::FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "json" => Ok(MatrixFormat::Json),
            other => Err(format!("unknown format \"{other}\", expected csv or json")),
        }
    }
}

/// Guesses the format from the file extension, defaulting to JSON.
pub fn format_for_path(path: &std::path::Path) -> MatrixFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => MatrixFormat::Csv,
        _ => MatrixFormat::Json,
    }
}

pub fn write_matrix(
    matrix: &EmbeddingMatrix,
    format: MatrixFormat,
    writer: &mut dyn Write,
) -> Result<(), CliError> {
    match format {
        MatrixFormat::Csv => write_csv(matrix, writer),
        MatrixFormat::Json => write_json(matrix, writer),
    }
}

pub fn read_matrix(format: MatrixFormat, reader: &mut dyn Read) -> Result<EmbeddingMatrix, CliError> {
    match format {
        MatrixFormat::Csv => read_csv(reader),
        MatrixFormat::Json => read_json(reader),
    }
}

fn write_csv(matrix: &EmbeddingMatrix, writer: &mut dyn Write) -> Result<(), CliError> {
    let header: Vec<&str> = (0..matrix.len()).map(|i| matrix.rendered(i)).collect();
    writeln!(writer, "{}", header.join(","))?;
    for row in 0..matrix.dim() {
        let cells: Vec<String> = (0..matrix.len())
            .map(|col| format!("{:.17e}", matrix.column(col)[row]))
            .collect();
        writeln!(writer, "{}", cells.join(","))?;
    }
    Ok(())
}

fn read_csv(reader: &mut dyn Read) -> Result<EmbeddingMatrix, CliError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let labels: Vec<HorizonLabel> = {
        let headers = csv_reader.headers()?;
        let alphabet = Alphabet::universal();
        headers
            .iter()
            .map(|h| parse_label(h, &alphabet).map_err(CliError::from))
            .collect::<Result<_, _>>()?
    };
    let mut columns = vec![Vec::new(); labels.len()];
    for record in csv_reader.records() {
        let record = record?;
        if record.len() != labels.len() {
            return Err(CliError::io(format!(
                "embedding csv row has {} cells, expected {}",
                record.len(),
                labels.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .trim()
                .parse()
                .map_err(|e| CliError::io(format!("embedding csv cell \"{cell}\": {e}")))?;
            columns[col].push(value);
        }
    }
    Ok(EmbeddingMatrix::from_columns(labels, columns)?)
}

fn write_json(matrix: &EmbeddingMatrix, writer: &mut dyn Write) -> Result<(), CliError> {
    let mut map = serde_json::Map::with_capacity(matrix.len());
    for i in 0..matrix.len() {
        let coords: Vec<serde_json::Value> = matrix
            .column(i)
            .iter()
            .map(|x| serde_json::Value::from(*x))
            .collect();
        map.insert(matrix.rendered(i).to_string(), serde_json::Value::Array(coords));
    }
    serde_json::to_writer_pretty(&mut *writer, &serde_json::Value::Object(map))?;
    writeln!(writer)?;
    Ok(())
}

fn read_json(reader: &mut dyn Read) -> Result<EmbeddingMatrix, CliError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)?;
    let alphabet = Alphabet::universal();
    let mut labels = Vec::with_capacity(map.len());
    let mut columns = Vec::with_capacity(map.len());
    for (key, value) in map {
        labels.push(parse_label(&key, &alphabet)?);
        let coords = value
            .as_array()
            .ok_or_else(|| CliError::io(format!("embedding of \"{key}\" is not an array")))?;
        let column: Vec<f64> = coords
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| CliError::io(format!("non-numeric coordinate in \"{key}\"")))
            })
            .collect::<Result<_, _>>()?;
        columns.push(column);
    }
    Ok(EmbeddingMatrix::from_columns(labels, columns)?)
}
