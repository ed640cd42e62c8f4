//! dB image export as CSV or 16-bit PGM.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::imaging::IntensityImage;
use crate::model::SparseImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Csv,
    Pgm,
}

impl ImageFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ImageFormat::Csv),
            "pgm" => Ok(ImageFormat::Pgm),
            other => Err(Error::config("output.format", format!("expected csv or pgm, got {other:?}"))),
        }
    }

    /// Format implied by a file extension, if any.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(ImageFormat::Csv),
            "pgm" => Some(ImageFormat::Pgm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ImageRef<'a> {
    Intensity(&'a IntensityImage),
    Sparse(&'a SparseImage),
}

impl ImageRef<'_> {
    /// Power on the grid, n_z rows by n_x columns.
    pub fn power(&self) -> DMatrix<f64> {
        match self {
            ImageRef::Intensity(i) => i.values.clone(),
            ImageRef::Sparse(s) => s.power_image(),
        }
    }
}

/// Peak-normalised dB values clipped at `floor_db`. The flag is set for an
/// all-zero image, which maps to the floor everywhere.
pub fn db_image(power: &DMatrix<f64>, floor_db: f64) -> Result<(DMatrix<f64>, bool)> {
    if !(floor_db < 0.0) {
        return Err(Error::config("output.db_floor", format!("must be negative, got {floor_db}")));
    }
    if power.is_empty() {
        return Err(Error::Data("image is empty".into()));
    }
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Ok((DMatrix::from_element(power.nrows(), power.ncols(), floor_db), true));
    }
    Ok((power.map(|v| (10.0 * (v / peak).log10()).max(floor_db)), false))
}

pub fn render_csv(db: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..db.nrows() {
        for j in 0..db.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:.6}", db[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Binary 16-bit PGM: `floor_db` maps to 0, 0 dB to 65535.
pub fn render_pgm(db: &DMatrix<f64>, floor_db: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", db.ncols(), db.nrows()).into_bytes();
    for i in 0..db.nrows() {
        for j in 0..db.ncols() {
            let t = ((db[(i, j)] - floor_db) / -floor_db).clamp(0.0, 1.0);
            out.extend_from_slice(&((t * 65535.0).round() as u16).to_be_bytes());
        }
    }
    out
}

/// Writes the image and returns a warning for all-zero input.
pub fn export_image(path: impl AsRef<Path>, image: ImageRef<'_>, format: ImageFormat, floor_db: f64) -> Result<Option<String>> {
    let (db, all_zero) = db_image(&image.power(), floor_db)?;
    match format {
        ImageFormat::Csv => fs::write(path, render_csv(&db))?,
        ImageFormat::Pgm => fs::write(path, render_pgm(&db, floor_db))?,
    }
    Ok(all_zero.then(|| format!("image is identically zero, exported as uniform {floor_db} dB")))
}

/// Reads a CSV written by [`export_image`].
pub fn read_csv_image(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse { line: n + 1, detail: e.to_string() }))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: n + 1,
                    detail: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let n_x = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_fn(rows.len(), n_x, |i, j| rows[i][j]))
}
