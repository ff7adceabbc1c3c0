//! Plain-text CSV exchange formats.
//!
//! Two layouts, both with a header row:
//! - labeled datasets: `label,x_0,...,x_{D-1}`
//! - tagged samples (latent or generated points): `mode,x_0,...,x_{D-1}`

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::LabeledDataset;

fn header(tag: &str, dim: usize) -> String {
    let mut cols = Vec::with_capacity(dim + 1);
    cols.push(tag.to_string());
    for j in 0..dim {
        cols.push(format!("x_{j}"));
    }
    cols.join(",")
}

fn format_rows<F: Scalar>(tag: &str, points: &Array2<F>, indices: &[usize]) -> String {
    let mut out = String::new();
    out.push_str(&header(tag, points.ncols()));
    out.push('\n');
    for (row, &idx) in points.rows().into_iter().zip(indices) {
        out.push_str(&idx.to_string());
        for v in row.iter() {
            out.push(',');
            out.push_str(&v.as_f64().to_string());
        }
        out.push('\n');
    }
    out
}

fn parse_rows(text: &str, expected_tag: &str) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let head = lines.next().ok_or(Error::Csv("empty file".into()))?;
    let cols: Vec<&str> = head.split(',').collect();
    if cols.len() < 2 || cols[0] != expected_tag {
        return Err(Error::Csv(format!(
            "expected header starting with '{expected_tag}', got '{head}'"
        )));
    }
    let dim = cols.len() - 1;
    let mut tags = Vec::new();
    let mut rows = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Csv(format!(
                "line {}: expected {} fields, got {}",
                line_no + 2,
                dim + 1,
                fields.len()
            )));
        }
        let tag: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| Error::Csv(format!("line {}: bad {expected_tag} ({e})", line_no + 2)))?;
        let mut row = Vec::with_capacity(dim);
        for f in &fields[1..] {
            row.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("line {}: bad value ({e})", line_no + 2)))?,
            );
        }
        tags.push(tag);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    Ok((tags, rows))
}

fn to_matrix<F: Scalar>(rows: Vec<Vec<f64>>) -> Array2<F> {
    let dim = rows[0].len();
    Array2::from_shape_fn((rows.len(), dim), |(i, j)| F::of(rows[i][j]))
}

/// Writes a labeled dataset as `label,x_0,...` rows.
pub fn write_labeled_csv<F: Scalar>(ds: &LabeledDataset<F>, path: impl AsRef<Path>) -> Result<()> {
    let text = format_rows("label", ds.points(), ds.labels());
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a `label,x_0,...` file back into a dataset.
pub fn read_labeled_csv<F: Scalar>(path: impl AsRef<Path>) -> Result<LabeledDataset<F>> {
    let text = std::fs::read_to_string(path)?;
    let (labels, rows) = parse_rows(&text, "label")?;
    LabeledDataset::new(to_matrix(rows), labels)
}

/// Writes mode-tagged points as `mode,x_0,...` rows.
pub fn write_samples_csv<F: Scalar>(
    points: &Array2<F>,
    modes: &[usize],
    path: impl AsRef<Path>,
) -> Result<()> {
    if points.nrows() != modes.len() {
        return Err(Error::LengthMismatch {
            left: points.nrows(),
            right: modes.len(),
        });
    }
    let text = format_rows("mode", points, modes);
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a `mode,x_0,...` file back into points and tags.
pub fn read_samples_csv<F: Scalar>(path: impl AsRef<Path>) -> Result<(Array2<F>, Vec<usize>)> {
    let text = std::fs::read_to_string(path)?;
    let (modes, rows) = parse_rows(&text, "mode")?;
    Ok((to_matrix(rows), modes))
}
