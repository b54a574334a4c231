//! CSV data files, the binary model format and SVG figures.

pub mod csv;
mod persist;
pub mod plot;

pub use persist::{
    decode_model, encode_model, load_model, save_model, sidecar_path, ModelHeader, SavedModel,
    FORMAT_VERSION, MAGIC,
};
