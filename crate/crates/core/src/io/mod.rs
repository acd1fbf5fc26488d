//! File formats: a MAT-file subset, binary PGM/PPM, and raw payloads with a
//! TOML sidecar. Every reader has a byte-level counterpart (`parse_*`,
//! `decode_raw`) that never panics on malformed input.

mod image;
mod mat;
mod raw;

pub use image::{encode_image, parse_image, read_image, write_image};
pub use mat::{encode_mat, parse_mat, read_mat, write_mat, MatVariable, HEADER_TEXT, MAX_NAME_BYTES};
pub use raw::{decode_raw, read_raw, write_raw, RawSidecar};
