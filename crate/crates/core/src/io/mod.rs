//! Configuration ingestion, field persistence and run provenance.

pub mod config;
pub mod expr;
pub mod field_io;
pub mod manifest;

pub use config::{parse_config, parse_config_str, save_problem, ConfigFile, ParsedConfig};
pub use field_io::{
    load_field, load_field_on, load_spatial_field_on, save_field, save_spatial_field, FieldFormat,
};
pub use manifest::RunManifest;
