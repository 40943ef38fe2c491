//! File formats, checkpoints, CSV ingestion and synthetic fields.

mod checkpoint;
mod csv_import;
mod field;
mod synth;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
};
pub use csv_import::{import_csv, import_csv_reader, SNAP_TOL};
pub use field::{decode_field, encode_field, load_field, save_field, FIELD_HEADER_LEN, FIELD_MAGIC};
pub use synth::{evaluate_harmonic_sum, synth_coefficients, synth_field, synth_series};
