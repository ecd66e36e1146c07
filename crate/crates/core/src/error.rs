use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("invalid k-grid size {0}: must be even and at least 8")]
    InvalidGrid(usize),

    #[error("grid refinement exceeded cap of {cap} nodes")]
    GridCapExceeded { cap: usize },

    #[error("gapless at {0}")]
    Gapless(String),

    #[error("loop is not planar in the {plane} plane (out-of-plane {out_of_plane:.3e} at node {node})")]
    NotPlanar {
        plane: &'static str,
        node: usize,
        out_of_plane: f64,
    },

    #[error("angle step {step:.3} rad between nodes {node} and {next} is too large")]
    AngleStepTooLarge { node: usize, next: usize, step: f64 },

    #[error("loop is not anchored to the {axis} axis at k={at}")]
    NotAnchored { axis: &'static str, at: &'static str },

    #[error("symmetry constraint violated: {0}")]
    ConstraintViolated(String),

    #[error("crossing of the z axis too close to the origin (z={z:.3e}) between nodes {node} and {next}")]
    TangentialCrossing { node: usize, next: usize, z: f64 },

    #[error("grid mismatch: {0} vs {1} nodes")]
    GridMismatch(usize, usize),

    #[error("witness construction failed: {0}")]
    WitnessFailed(String),

    #[error("Hamiltonian is not real (|y|={y:.3e} at node {node})")]
    NotReal { node: usize, y: f64 },

    #[error("eigenvector lift failed: {0}")]
    LiftFailed(String),

    #[error("reflection does not commute with the Hamiltonian (residual {0:.3e})")]
    NotCommuting(f64),

    #[error("reflection operator is not an involution (residual {0:.3e})")]
    NotInvolution(f64),

    #[error("Hamiltonian has an eigenvalue {0:.3e} inside the gap window")]
    GaplessAtK(f64),

    #[error("parity eigenvalue {0:.6} is not ±1")]
    NonIntegerParity(f64),

    #[error("no gapped sample found after {attempts} attempts (sample {index})")]
    NoGappedSample { index: usize, attempts: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
