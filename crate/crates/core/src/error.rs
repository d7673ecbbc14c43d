use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by estimation, data handling and simulation.
#[derive(Debug, Error)]
pub enum DpdrError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("non-numeric value {value:?} in column `{column}` at row {row}")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("only {distinct} distinct responses, cannot form {slices} non-empty slices")]
    TooFewDistinct { distinct: usize, slices: usize },

    #[error("total kernel mass {mass:.3e} below floor at query point {query:?}")]
    DegenerateNeighborhood { query: Vec<f64>, mass: f64 },

    #[error("slice {slice} has kernel probability {prob:.3e} below floor at query point {query:?}")]
    EmptySliceAtQuery {
        slice: usize,
        prob: f64,
        query: Vec<f64>,
    },

    #[error("covariance matrix is singular after ridge regularisation")]
    SingularCovariance,

    #[error("slice {slice} has {size} members, need at least {needed}")]
    SliceTooSmall {
        slice: usize,
        size: usize,
        needed: usize,
    },

    #[error("every (slice, bandwidth) cross-validation cell was invalid")]
    AllCellsInvalid,

    #[error("all {0} bootstrap replicates were degenerate")]
    AllReplicatesFailed(usize),

    #[error("query point {query:?} outside the support of model {model}")]
    OffSupport { model: String, query: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl DpdrError {
    /// True for failures caused by the data or the query point rather than
    /// by bad arguments or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DpdrError::DegenerateNeighborhood { .. }
                | DpdrError::EmptySliceAtQuery { .. }
                | DpdrError::SingularCovariance
                | DpdrError::AllCellsInvalid
                | DpdrError::AllReplicatesFailed(_)
                | DpdrError::Numerical(_)
        )
    }

    /// Short stable name of the variant, for tabular output.
    pub fn kind(&self) -> &'static str {
        match self {
            DpdrError::Io { .. } => "Io",
            DpdrError::Csv(_) => "Csv",
            DpdrError::UnknownColumn(_) => "UnknownColumn",
            DpdrError::NonNumeric { .. } => "NonNumeric",
            DpdrError::InvalidData(_) => "InvalidData",
            DpdrError::InvalidArgument(_) => "InvalidArgument",
            DpdrError::TooFewDistinct { .. } => "TooFewDistinct",
            DpdrError::DegenerateNeighborhood { .. } => "DegenerateNeighborhood",
            DpdrError::EmptySliceAtQuery { .. } => "EmptySliceAtQuery",
            DpdrError::SingularCovariance => "SingularCovariance",
            DpdrError::SliceTooSmall { .. } => "SliceTooSmall",
            DpdrError::AllCellsInvalid => "AllCellsInvalid",
            DpdrError::AllReplicatesFailed(_) => "AllReplicatesFailed",
            DpdrError::OffSupport { .. } => "OffSupport",
            DpdrError::Numerical(_) => "Numerical",
        }
    }
}

pub type Result<T, E = DpdrError> = std::result::Result<T, E>;
