//! Parsing and validation of the three input datasets: street-view
//! detections (JSONL), building footprints (GeoJSON), and census
//! microdata (CSV plus a YAML variable schema).

mod census;
mod detections;
mod footprints;

pub use census::{
    parse_census, write_census_csv, CensusSchema, CensusVariable, HouseholdRecord, Polarity,
    VariableKind,
};
pub use detections::{
    parse_detections, write_detections_jsonl, ClassScore, DetectionAttributes, DetectionRecord,
    Side,
};
pub(crate) use detections::DetectionWire;
pub use footprints::{parse_footprints, write_footprints_geojson, FootprintFeature};

use std::path::PathBuf;

/// Errors raised while reading input files. Every variant carries enough
/// context to point at the offending file, line, field, or column.
#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: field `{field}`: {message}")]
    Field { path: PathBuf, line: usize, field: String, message: String },
    #[error("{path}: column `{column}`: {message}")]
    Column { path: PathBuf, column: String, message: String },
    #[error("{path}:{line}: column `{column}`: {message}")]
    Cell { path: PathBuf, line: usize, column: String, message: String },
    #[error("{path}: feature {index}: {message}")]
    Feature { path: PathBuf, index: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}
