use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("serving cell {cell} is off")]
    ServingCellOff { cell: usize },

    #[error("handover target cell {cell} for UE {ue} is off")]
    InactiveTarget { ue: usize, cell: usize },

    #[error("unservable UE {ue}: no active cell")]
    UnservableUe { ue: usize },

    #[error("genome violates bounds: gene {gene} = {value} outside [{lo}, {hi}]")]
    GenomeBounds {
        gene: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("genome layout mismatch")]
    LayoutMismatch,

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid mobility speed range [{min}, {max}]")]
    InvalidSpeedRange { min: f64, max: f64 },

    #[error("degenerate variance in both samples")]
    DegenerateVariance,

    #[error("empty sample")]
    EmptySample,

    #[error("campaign plan mismatch: {0}")]
    PlanMismatch(String),

    #[error("unsupported schema in {path}: found `{found}`, expected `{expected}`")]
    SchemaVersion {
        path: String,
        found: String,
        expected: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
