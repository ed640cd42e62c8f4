//! Frequency datasets as a sequence of three `LSCM` records: bin angular
//! frequencies (B x 1 real), noise level (1 x 1 real), and the per-bin
//! matrices stacked vertically ((B M) x M complex).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::matrix::{decode_matrix, encode_matrix, MatrixData};
use crate::error::{Error, Result};
use crate::model::{FrequencyDataset, C64};

pub fn encode_dataset<W: Write>(w: &mut W, ds: &FrequencyDataset) -> Result<()> {
    let m = ds.element_count();
    let b = ds.bins();
    encode_matrix(w, &MatrixData::Real(DMatrix::from_column_slice(b, 1, ds.omegas())))?;
    encode_matrix(w, &MatrixData::Real(DMatrix::from_element(1, 1, ds.sigma())))?;
    let mut stacked = DMatrix::<C64>::zeros(b * m, m);
    for (k, mat) in ds.matrices().iter().enumerate() {
        stacked.view_mut((k * m, 0), (m, m)).copy_from(mat);
    }
    encode_matrix(w, &MatrixData::Complex(stacked))
}

fn next<R: Read>(r: &mut R, what: &str) -> Result<MatrixData> {
    decode_matrix(r)?.ok_or_else(|| Error::Corruption(format!("dataset ends before the {what} record")))
}

pub fn decode_dataset<R: Read>(r: &mut R) -> Result<FrequencyDataset> {
    let omegas = next(r, "frequency")?.into_real()?;
    let sigma = next(r, "noise")?.into_real()?;
    let stacked = next(r, "data")?.into_complex()?;
    if decode_matrix(r)?.is_some() {
        return Err(Error::Format("trailing records after dataset".into()));
    }
    if omegas.ncols() != 1 || sigma.shape() != (1, 1) {
        return Err(Error::Format("frequency or noise record has the wrong shape".into()));
    }
    let b = omegas.nrows();
    let m = stacked.ncols();
    if stacked.nrows() != b * m {
        return Err(Error::Format(format!("data record is {}x{}, expected {}x{m}", stacked.nrows(), m, b * m)));
    }
    let data = (0..b).map(|k| stacked.view((k * m, 0), (m, m)).into_owned()).collect();
    FrequencyDataset::new(omegas.column(0).iter().cloned().collect(), data, sigma[(0, 0)])
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &FrequencyDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_dataset(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<FrequencyDataset> {
    decode_dataset(&mut BufReader::new(File::open(path)?))
}
