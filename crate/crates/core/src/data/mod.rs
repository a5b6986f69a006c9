//! Tabular data: CSV ingestion, feature encoding, the population/target
//! split protocol, quasi-identifier equivalence classes and federated
//! sharding.

mod dataset;
mod encode;
mod partition;
mod singleout;
pub mod synthetic;

pub use dataset::{
    load_csv, load_csv_reader, Cell, ColumnKind, ColumnSchema, Dataset, DatasetSummary, SchemaHint,
};
pub use encode::{encode_features, BlockEncoding, EncodedMatrix, Encoder, FeatureBlock};
pub use partition::{
    make_federated_shards, make_partition, partition_rows, DataPartition, Shard,
    MIN_PARTITION_ROWS,
};
pub use singleout::{detect_single_outs, EquivalenceClass, QuasiIdentifierSet, SingleOutReport};
