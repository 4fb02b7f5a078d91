//! Dataset IO, run records and the `agufs` command-line front end for the
//! `agufs-core` solver.

pub mod cli;
pub mod data;
pub mod record;

pub use data::{load_csv, standardize, write_csv, CsvOptions, DataError, Dataset, LabelColumn, Standardize};
pub use record::{RunRecord, ScoreRow, TraceRow};
