use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested quantity.
    #[error("domain error: {0}")]
    Domain(&'static str),
    /// Inconsistent grid, excitation or engine configuration.
    #[error("configuration error: {0}")]
    Config(&'static str),
    /// Energy outside the propagating band of the leads.
    #[error("energy {energy} eV lies outside the lead band (0, {band_top}) eV")]
    OutOfBand { energy: f64, band_top: f64 },
    #[error("singular linear system at row {row}")]
    Singular { row: usize },
    #[error("solver breakdown at step {step}: {reason}")]
    Breakdown { step: usize, reason: &'static str },
    #[error("no bracketing barrier height found up to {upper} V")]
    Calibration { upper: f64 },
    /// Free-flight extension refused because the field has reached the box edges.
    #[error("scattered wave reaches the box edge: relative edge norm {edge_norm:e}")]
    EdgeSupport { edge_norm: f64 },
    #[error("sample grids differ: {0}")]
    GridMismatch(&'static str),
}
