//! Homotopy classification of gapped two-band Bloch Hamiltonians in one
//! dimension.
//!
//! A two-band Bloch Hamiltonian `H(k) = x_k·σ + t_k 𝟙` traces a closed curve
//! in `ℝ³∖{0}` as `k` runs over the Brillouin zone. Symmetries relate the
//! curve at `k` and `−k` (or constrain it pointwise), and the homotopy
//! classes of the constrained curves are the phases of the insulator.
//!
//! The crate is organised as:
//!
//! - [`bloch`]: hopping data, Bloch evaluation, sampled loops, gap and
//!   ground-state projector.
//! - [`symmetry`]: the thirteen symmetry classes, residuals, detection,
//!   symmetrization and unit-cell (gauge) changes.
//! - [`invariants`]: anchor signs, windings, the λ–z world line and the
//!   class label assignment.
//! - [`homotopy`]: discretized homotopy paths, the path verifier, witness
//!   constructions and connectivity sampling.
//! - [`multiband`]: real projector invariants, reflection indices and open
//!   chain spectra.
//! - [`fixtures`]: the canonical model Hamiltonians.

pub mod bloch;
mod error;
pub mod fixtures;
pub mod homotopy;
pub mod invariants;
pub mod matrix;
pub mod multiband;
pub mod symmetry;

pub use bloch::{
    eval_bloch, gap, ground_projector, pauli_decompose, sample_loop, validate_hoppings, BlochSeries,
    GapReport, Hoppings, KGrid, PauliVec, SampledLoop,
};
pub use error::{Error, Result};
pub use homotopy::{
    connectivity_sample, linear_path, verify_path, witness_to_representative, ConnectivityReport,
    HomotopyPath, PathReport,
};
pub use invariants::{
    anchor_signs, classify, crossing_parity, lambda_z_curve, relabel_under_gauge, winding_plane,
    Axis, ClassLabel, LabelKind, LambdaZCurve, Parity, Plane, Sign,
};
pub use matrix::Matrix2;
pub use symmetry::{detect, gauge_transform, residual, symmetrize, ResidualReport, SymmetryClass};

/// Absolute threshold on `‖x‖` below which a Hamiltonian counts as gapless.
pub const GAP_TOL: f64 = 1e-9;

/// Default tolerance for symmetry residuals.
pub const SYM_TOL: f64 = 1e-9;
