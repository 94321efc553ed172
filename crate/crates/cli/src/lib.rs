//! File formats and pipeline glue around `htk-core`: taxonomy configuration,
//! embedding matrix import/export, record and sample streams, report
//! rendering and the reference baseline pipeline.

pub mod error;
pub mod matrix_io;
pub mod pipeline;
pub mod records_io;
pub mod report;
pub mod samples;
pub mod taxonomy_file;
