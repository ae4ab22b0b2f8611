use thiserror::Error;

use crate::decomposition::CellId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("axis {axis} out of range for dimension {dimension}")]
    AxisOutOfRange { axis: usize, dimension: usize },

    #[error("coordinate {value} on axis {axis} is outside [0, 1]")]
    OutOfUnitCube { axis: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration {0:?} is in collision")]
    InCollision(Vec<f64>),

    #[error("cell {0} has no samples")]
    EmptyCell(CellId),

    #[error("cell {0} is not a leaf of the split tree")]
    NotALeaf(CellId),

    #[error("cell {cell} has no stored sample opposing the new one")]
    NoOpposingSample { cell: CellId },

    #[error("free and colliding samples coincide at {q:?} in cell {cell}; collision oracle is inconsistent")]
    CoincidentSamples { cell: CellId, q: Vec<f64> },

    #[error("split coordinate {coordinate} on axis {axis} is not strictly inside cell {cell}")]
    SplitOutsideCell {
        cell: CellId,
        axis: usize,
        coordinate: f64,
    },

    #[error("cells {0} and {1} do not share a face")]
    NotAdjacent(CellId, CellId),

    #[error("children do not tile parent cell {0}")]
    BadTiling(CellId),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("trace does not match scene: {0}")]
    TraceMismatch(String),

    #[error("malformed trace at line {line}: {message}")]
    MalformedTrace { line: usize, message: String },

    #[error("scene file: {0}")]
    SceneFormat(String),

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("render supports 2-D scenes only")]
    RenderDimension,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
