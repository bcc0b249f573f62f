use thiserror::Error;

/// Errors raised by the workbench. Verification failures are not errors;
/// they are reported as data by the individual checks.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unsupported root system `{0}`")]
    UnsupportedSystem(String),
    #[error("degenerate window: {0}")]
    DegenerateWindow(String),
    #[error("cell is not part of this apartment")]
    CellNotInApartment,
    #[error("point lies outside the window")]
    OutsideWindow,
    #[error("cell is not a chamber")]
    NotAChamber,
    #[error("singular linear system")]
    Singular,
    #[error("point is not a vertex of the refined complex")]
    NotAVertex,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not convex: {0}")]
    NotConvex(String),
    #[error("depth {0} is not a multiple of 1/{1}")]
    DepthNotOnGrid(String, u32),
    #[error("enumeration budget exceeded: {needed} > {budget}")]
    Budget { needed: u64, budget: u64 },
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
