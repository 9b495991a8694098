//! Domain records, the dataset container, experiment design and the on-disk
//! metadata and trace formats.

mod dataset;
mod design;
mod records;
mod table;
pub mod trace;

pub use dataset::{load_metadata, Dataset, METADATA_SCHEMA};
pub use design::{enumerate_instances, DesignSpec, ModelInstanceKey};
pub use records::{SourceRecord, WaveformKind, WaveformRecord, DEFAULT_SAMPLING_RATE_HZ};
pub use table::MetricTable;
pub use trace::{load_trace, write_trace, TraceSamples};
