//! File formats: binary matrices, datasets, TOML configuration and image export.

pub mod config;
pub mod dataset;
pub mod export;
pub mod matrix;

pub use config::{
    load_config, load_config_with, parse_config, parse_config_with, BinSelection, Method, MethodParams, NoiseLevel, OutputConfig,
    RunConfig,
};
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use export::{db_image, export_image, read_csv_image, ImageFormat, ImageRef};
pub use matrix::{decode_matrix, encode_matrix, read_matrix, write_matrix, Dtype, MatrixData};
