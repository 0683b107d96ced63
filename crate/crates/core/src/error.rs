use alloc::string::String;

/// Errors raised by the core engine and search routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("genome has {found} genes but the architecture has {expected} conv layers")]
    GenomeArity { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label {label} out of range for {num_classes} classes")]
    Label { label: usize, num_classes: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid metric input: {0}")]
    MetricInput(String),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("invalid crossover: {0}")]
    Crossover(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("search space of {m}^{n} genomes is not representable")]
    Unrepresentable { n: usize, m: usize },

    #[error("search space of {size} genomes exceeds the cap of {cap}")]
    SpaceTooLarge { size: String, cap: u64 },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("report error: {0}")]
    Report(String),
}

pub type Result<T> = core::result::Result<T, Error>;
