//! Configuration, trace files and result records.

pub mod config;
pub mod csv;
pub mod records;

pub use config::{Provenance, RunConfig, RunSetup};
pub use self::csv::{ingest_csv, read_trace, write_trace, ColumnMap, ExperimentTrace};
pub use records::{parse_records, records_to_string, Record};
