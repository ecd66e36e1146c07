//! Beyond two bands: real projector loops and their eigenvector lifts,
//! reflection parity indices at `k = 0, π`, and open-chain spectra.
//!
//! A real rank-one projector loop `P(k)` in `ℝⁿ` has a unit eigenvector
//! `|k⟩` that can be followed continuously across the zone. At the end it
//! returns to `±|−π⟩`; for `n = 2` the eigenvector turns by a multiple of
//! `π`, giving a half-integer winding, while for `n ≥ 3` only the sign
//! survives. Two `n = 2` loops with different odd windings therefore become
//! connected after embedding into `n = 3`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bloch::{eval_bloch, pauli_decompose, Hoppings, KGrid, SampledLoop, GRID_CAP};
use crate::error::{Error, Result};
use crate::invariants::wrap_angle;
use crate::matrix::Matrix2;
use crate::symmetry::SymmetryClass;
use crate::GAP_TOL;

const PROJECTOR_TOL: f64 = 1e-9;
const REAL_TOL: f64 = 1e-9;
const MIN_OVERLAP: f64 = 0.9;
const PARITY_TOL: f64 = 1e-6;
/// Largest change of any projector entry norm between consecutive frames.
pub const PROJECTOR_STEP: f64 = 0.25;

type Source = Arc<dyn Fn(f64) -> Result<DMatrix<f64>> + Send + Sync>;

/// Real symmetric rank-one projectors on a grid.
///
/// Loops built from hoppings keep the generating function so the grid can
/// be refined later.
#[derive(Clone)]
pub struct RealProjectorLoop {
    pub n: usize,
    pub grid: KGrid,
    pub mats: Vec<DMatrix<f64>>,
    source: Option<Source>,
}

impl fmt::Debug for RealProjectorLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealProjectorLoop")
            .field("n", &self.n)
            .field("grid", &self.grid)
            .field("refinable", &self.source.is_some())
            .finish()
    }
}

/// Largest violation of `P = Pᵀ`, `P² = P` and `tr P = 1`.
pub fn projector_defect(p: &DMatrix<f64>) -> f64 {
    let sym = (p - p.transpose()).amax();
    let idem = (p * p - p).amax();
    let tr = (p.trace() - 1.0).abs();
    sym.max(idem).max(tr)
}

impl RealProjectorLoop {
    pub fn new(grid: KGrid, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.len() != grid.n() {
            return Err(Error::GridMismatch(grid.n(), mats.len()));
        }
        let n = mats[0].nrows();
        for (m, p) in mats.iter().enumerate() {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::Invalid(format!("matrix at node {m} is not {n}×{n}")));
            }
            let d = projector_defect(p);
            if !(d <= PROJECTOR_TOL) {
                return Err(Error::Invalid(format!("node {m} is not a rank-one projector (defect {d:.3e})")));
            }
        }
        Ok(RealProjectorLoop { n, grid, mats, source: None })
    }

    fn with_source(grid: KGrid, source: Source) -> Result<Self> {
        let mats = grid.ks().map(|k| source(k)).collect::<Result<Vec<_>>>()?;
        let mut lp = RealProjectorLoop::new(grid, mats)?;
        lp.source = Some(source);
        Ok(lp)
    }

    /// The same loop on another grid; needs a generating function.
    pub fn resampled(&self, grid: KGrid) -> Result<Self> {
        if grid == self.grid {
            return Ok(self.clone());
        }
        let src = self
            .source
            .clone()
            .ok_or_else(|| Error::LiftFailed("loop has no generating function to resample".into()))?;
        RealProjectorLoop::with_source(grid, src)
    }
}

fn real_projector(m: &Matrix2, node: usize) -> Result<DMatrix<f64>> {
    let p = pauli_decompose(m)?;
    if !(p.y.abs() < REAL_TOL) {
        return Err(Error::NotReal { node, y: p.y });
    }
    let r = p.norm();
    if !(r > GAP_TOL) {
        return Err(Error::Gapless(format!("node {node} (‖x‖ = {r:.3e})")));
    }
    let (x, z) = (p.x / r, p.z / r);
    Ok(DMatrix::from_row_slice(2, 2, &[(1.0 - z) / 2.0, -x / 2.0, -x / 2.0, (1.0 + z) / 2.0]))
}

/// Ground projectors `(𝟙 − x̂·σ)/2` of a real two-band loop.
pub fn projector_from_loop(lp: &SampledLoop) -> Result<RealProjectorLoop> {
    let mats = lp
        .points
        .iter()
        .enumerate()
        .map(|(m, p)| real_projector(&p.to_matrix(), m))
        .collect::<Result<Vec<_>>>()?;
    RealProjectorLoop::new(lp.grid, mats)
}

/// Ground projectors of real two-band hoppings, refinable on demand.
pub fn projector_from_hoppings(h: &Hoppings, grid: KGrid) -> Result<RealProjectorLoop> {
    let h = h.clone();
    let src: Source = Arc::new(move |k| real_projector(&eval_bloch(&h, k), 0));
    RealProjectorLoop::with_source(grid, src)
}

fn embed_matrix(p: &DMatrix<f64>, extra: usize) -> DMatrix<f64> {
    let n = p.nrows();
    let mut out = DMatrix::zeros(n + extra, n + extra);
    out.view_mut((0, 0), (n, n)).copy_from(p);
    out
}

/// `P ↦ [[P, 0], [0, 0]]` with `extra` added dimensions.
pub fn embed(p: &RealProjectorLoop, extra: usize) -> RealProjectorLoop {
    let source = p.source.clone().map(|s| -> Source { Arc::new(move |k| s(k).map(|m| embed_matrix(&m, extra))) });
    RealProjectorLoop {
        n: p.n + extra,
        grid: p.grid,
        mats: p.mats.iter().map(|m| embed_matrix(m, extra)).collect(),
        source,
    }
}

/// Continuous unit eigenvectors `|k_m⟩` for `m = 0..=n`; the last one sits
/// at `k = π`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvectorLift {
    pub grid: KGrid,
    pub vecs: Vec<DVector<f64>>,
    /// `|π⟩ = endpoint_sign · |−π⟩`.
    pub endpoint_sign: i8,
}

impl EigenvectorLift {
    pub fn min_overlap(&self) -> f64 {
        self.vecs.windows(2).map(|w| w[0].dot(&w[1])).fold(f64::INFINITY, f64::min)
    }
}

/// Unit vector spanning the range of a rank-one projector.
fn range_vector(p: &DMatrix<f64>) -> DVector<f64> {
    let j = p.diagonal().imax();
    let c = p.column(j).into_owned();
    let norm = c.norm();
    c / norm
}

fn lift_on_grid(p: &RealProjectorLoop) -> (Vec<DVector<f64>>, f64) {
    let n = p.grid.n();
    let mut vecs: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
    let mut first = range_vector(&p.mats[0]);
    if first[first.iamax()] < 0.0 {
        first = -first;
    }
    vecs.push(first);
    let mut min_overlap = f64::INFINITY;
    for m in 1..=n {
        let mut v = range_vector(&p.mats[m % n]);
        let prev = &vecs[m - 1];
        if v.dot(prev) < 0.0 {
            v = -v;
        }
        min_overlap = min_overlap.min(v.dot(prev));
        vecs.push(v);
    }
    (vecs, min_overlap)
}

/// Follows the eigenvector continuously, doubling the grid (when the loop
/// can be resampled) until consecutive overlaps exceed 0.9.
pub fn lift_eigenvector(p: &RealProjectorLoop) -> Result<EigenvectorLift> {
    let mut cur = p.clone();
    loop {
        let (vecs, min_overlap) = lift_on_grid(&cur);
        if min_overlap > MIN_OVERLAP {
            let end = vecs[cur.grid.n()].dot(&vecs[0]);
            let endpoint_sign = if end < 0.0 { -1 } else { 1 };
            return Ok(EigenvectorLift { grid: cur.grid, vecs, endpoint_sign });
        }
        if cur.source.is_none() {
            return Err(Error::LiftFailed(format!(
                "consecutive overlap {min_overlap:.3} ≤ {MIN_OVERLAP} and the loop cannot be refined"
            )));
        }
        if cur.grid.n() * 2 > GRID_CAP {
            return Err(Error::LiftFailed(format!("grid cap {GRID_CAP} exceeded")));
        }
        cur = cur.resampled(cur.grid.doubled())?;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealClass {
    /// `n = 2`: eigenvector winding in units of one half.
    Winding { halves: i64 },
    /// `n ≥ 3`: only the endpoint sign survives.
    Z2 { symmetric: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealClassReport {
    pub n: usize,
    pub grid_n: usize,
    pub endpoint_sign: i8,
    pub class: RealClass,
}

impl fmt::Display for RealClassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "grid_n={}", self.grid_n)?;
        match self.class {
            RealClass::Winding { halves } if halves % 2 == 0 => writeln!(f, "winding={}", halves / 2)?,
            RealClass::Winding { halves } => writeln!(f, "winding={halves}/2")?,
            RealClass::Z2 { symmetric } => {
                writeln!(f, "z2={}", if symmetric { "symmetric" } else { "antisymmetric" })?
            }
        }
        write!(f, "endpoint_sign={}", if self.endpoint_sign < 0 { "-" } else { "+" })
    }
}

/// Total turning of a lifted eigenvector in `ℝ²`, in half turns. The angle
/// is measured from `e_2` toward `e_1`, so it turns the same way as the
/// Pauli vector in the x–z plane.
pub fn eigenvector_half_turns(lift: &EigenvectorLift) -> Result<i64> {
    if lift.vecs[0].len() != 2 {
        return Err(Error::Invalid("eigenvector winding needs n = 2".into()));
    }
    let angle = |v: &DVector<f64>| v[0].atan2(v[1]);
    let total: f64 = lift.vecs.windows(2).map(|w| wrap_angle(angle(&w[1]) - angle(&w[0]))).sum();
    let halves = total / (TAU / 2.0);
    let r = halves.round();
    if (halves - r).abs() > 1e-6 {
        return Err(Error::LiftFailed(format!("eigenvector turned by {halves} half turns")));
    }
    Ok(r as i64)
}

/// ℤ class for `n = 2`, ℤ₂ class for `n ≥ 3`.
pub fn real_class(p: &RealProjectorLoop) -> Result<RealClassReport> {
    let lift = lift_eigenvector(p)?;
    let class = if p.n == 2 {
        RealClass::Winding { halves: eigenvector_half_turns(&lift)? }
    } else {
        RealClass::Z2 { symmetric: lift.endpoint_sign > 0 }
    };
    Ok(RealClassReport { n: p.n, grid_n: lift.grid.n(), endpoint_sign: lift.endpoint_sign, class })
}

/// Frames of a projector deformation on a common grid.
#[derive(Debug, Clone)]
pub struct ProjectorPath {
    pub grid: KGrid,
    pub frames: Vec<Vec<DMatrix<f64>>>,
}

impl ProjectorPath {
    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorPathReport {
    pub pass: bool,
    pub steps: usize,
    /// Largest `P = Pᵀ`, `P² = P`, `tr P = 1` violation over all frames.
    pub max_defect: f64,
    /// Largest entrywise change between consecutive frames.
    pub max_step: f64,
    pub first_failure: Option<String>,
}

impl fmt::Display for ProjectorPathReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "result={}", if self.pass { "PASS" } else { "FAIL" })?;
        writeln!(f, "steps={}", self.steps)?;
        writeln!(f, "max_defect={:.3e}", self.max_defect)?;
        write!(f, "max_step={:.3e}", self.max_step)?;
        if let Some(s) = &self.first_failure {
            write!(f, "\nfailure={s}")?;
        }
        Ok(())
    }
}

/// Every frame must consist of rank-one real projectors and consecutive
/// frames must differ by at most [`PROJECTOR_STEP`] entrywise.
pub fn verify_projector_path(p: &ProjectorPath, tol: f64) -> ProjectorPathReport {
    let mut max_defect: f64 = 0.0;
    let mut max_step: f64 = 0.0;
    let mut first_failure = None;
    for (i, frame) in p.frames.iter().enumerate() {
        for (m, mat) in frame.iter().enumerate() {
            let d = projector_defect(mat);
            max_defect = max_defect.max(d);
            if !(d <= tol) && first_failure.is_none() {
                first_failure = Some(format!("frame {i} node {m}: projector defect {d:.3e}"));
            }
            if let Some(next) = p.frames.get(i + 1) {
                let s = (&next[m] - mat).amax();
                max_step = max_step.max(s);
                if !(s <= PROJECTOR_STEP) && first_failure.is_none() {
                    first_failure = Some(format!("frames {i}-{} node {m}: step {s:.3e}", i + 1));
                }
            }
        }
    }
    ProjectorPathReport { pass: first_failure.is_none(), steps: p.steps(), max_defect, max_step, first_failure }
}

fn outer(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

/// Stereographic chart of `S^{n−1}` from the pole `q`.
fn stereo_project(v: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
    let d = 1.0 - v.dot(q);
    (v - q * v.dot(q)) / d
}

fn stereo_lift(w: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
    let r2 = w.norm_squared();
    (w * 2.0 + q * (r2 - 1.0)) / (r2 + 1.0)
}

fn choose_pole(n: usize, avoid: &[&DVector<f64>]) -> Result<DVector<f64>> {
    let mut candidates = Vec::new();
    for i in (0..n).rev() {
        for s in [1.0, -1.0] {
            let mut q = DVector::zeros(n);
            q[i] = s;
            candidates.push(q);
        }
    }
    let clearance = |q: &DVector<f64>| avoid.iter().map(|v| (*v - q).norm()).fold(f64::INFINITY, f64::min);
    let (best, c) = candidates
        .into_iter()
        .map(|q| {
            let c = clearance(&q);
            (q, c)
        })
        .fold((DVector::zeros(n), -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if c < 1e-3 {
        return Err(Error::LiftFailed("no stereographic pole clears both lifts".into()));
    }
    Ok(best)
}

/// Rotation in the plane of unit vectors `from`, `to` by `θ`, measured from
/// `from` toward `to`.
fn plane_rotation(from: &DVector<f64>, to: &DVector<f64>, theta: f64) -> impl Fn(&DVector<f64>) -> DVector<f64> {
    let u1 = from.clone();
    let perp = to - &u1 * to.dot(&u1);
    let u2 = if perp.norm() > 1e-12 { &perp / perp.norm() } else { DVector::zeros(u1.len()) };
    let (s, c) = theta.sin_cos();
    move |v| {
        let (a, b) = (v.dot(&u1), v.dot(&u2));
        v + &u1 * ((c - 1.0) * a - s * b) + &u2 * (s * a + (c - 1.0) * b)
    }
}

fn sample_frames(f: impl Fn(f64) -> Vec<DMatrix<f64>>) -> Vec<Vec<DMatrix<f64>>> {
    let mut steps = 64;
    loop {
        let frames: Vec<_> = (0..=steps).map(|i| f(i as f64 / steps as f64)).collect();
        let ok = frames.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| (b - a).amax() <= PROJECTOR_STEP));
        if ok || steps >= 4096 {
            return frames;
        }
        steps *= 2;
    }
}

/// A deformation between two projector loops with the same endpoint sign.
///
/// Both eigenvector lifts are put on one grid with aligned starting
/// vectors; they are joined by straight lines in a stereographic chart of
/// the sphere, which keeps the endpoints `±|−π⟩` fixed, and the second lift
/// is then rotated back to its own starting vector.
pub fn projector_homotopy(a: &RealProjectorLoop, b: &RealProjectorLoop) -> Result<ProjectorPath> {
    if a.n != b.n {
        return Err(Error::Invalid(format!("dimensions differ: {} vs {}", a.n, b.n)));
    }
    let (la, lb) = (lift_eigenvector(a)?, lift_eigenvector(b)?);
    if la.endpoint_sign != lb.endpoint_sign {
        return Err(Error::Invalid("endpoint signs differ; the loops lie in different classes".into()));
    }
    let grid = if la.grid.n() >= lb.grid.n() { la.grid } else { lb.grid };
    let la = if la.grid == grid { la } else { lift_eigenvector(&a.resampled(grid)?)? };
    let lb = if lb.grid == grid { lb } else { lift_eigenvector(&b.resampled(grid)?)? };
    let n = grid.n();

    let sign = if la.vecs[0].dot(&lb.vecs[0]) < 0.0 { -1.0 } else { 1.0 };
    let vb: Vec<DVector<f64>> = lb.vecs.iter().map(|v| v * sign).collect();
    let (a0, b0) = (la.vecs[0].clone(), vb[0].clone());
    let alpha = a0.dot(&b0).clamp(-1.0, 1.0).acos();
    let rot_all = plane_rotation(&b0, &a0, alpha);
    let vb_rot: Vec<DVector<f64>> = vb.iter().map(&rot_all).collect();

    let avoid: Vec<&DVector<f64>> = la.vecs.iter().chain(vb_rot.iter()).collect();
    let q = choose_pole(a.n, &avoid)?;
    let wa: Vec<DVector<f64>> = la.vecs[..n].iter().map(|v| stereo_project(v, &q)).collect();
    let wb: Vec<DVector<f64>> = vb_rot[..n].iter().map(|v| stereo_project(v, &q)).collect();

    let mut frames = sample_frames(|s| {
        wa.iter().zip(&wb).map(|(x, y)| outer(&stereo_lift(&(x * (1.0 - s) + y * s), &q))).collect()
    });
    if alpha > 1e-12 {
        let back = sample_frames(|s| {
            let r = plane_rotation(&b0, &a0, (1.0 - s) * alpha);
            vb[..n].iter().map(|v| outer(&r(v))).collect()
        });
        frames.extend(back.into_iter().skip(1));
    }
    Ok(ProjectorPath { grid, frames })
}

/// Negative-energy reflection parity counts at `k = 0` and `k = π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReflectionIndex {
    pub n_minus_0: usize,
    pub n_minus_pi: usize,
}

impl fmt::Display for ReflectionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n_minus_0={}\nn_minus_pi={}", self.n_minus_0, self.n_minus_pi)
    }
}

/// Number of negative-energy eigenstates of `h` with reflection parity −1.
///
/// The parity operator is diagonalized inside the negative eigenspace, so
/// degenerate levels are handled basis-independently.
pub fn reflection_index(h: &DMatrix<Complex64>, r: &DMatrix<Complex64>, tol: f64) -> Result<usize> {
    let n = h.nrows();
    let comm = (r * h - h * r).map(|c| c.norm()).max();
    if !(comm <= tol) {
        return Err(Error::NotCommuting(comm));
    }
    let inv = (r * r - DMatrix::<Complex64>::identity(n, n)).map(|c| c.norm()).max();
    if !(inv <= tol) {
        return Err(Error::NotInvolution(inv));
    }
    let eig = h.clone().symmetric_eigen();
    if let Some(&e) = eig.eigenvalues.iter().find(|e| e.abs() < tol) {
        return Err(Error::GaplessAtK(e));
    }
    let negative: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] < 0.0).collect();
    if negative.is_empty() {
        return Ok(0);
    }
    let v = eig.eigenvectors.select_columns(&negative);
    let compressed = v.adjoint() * r * &v;
    let parities = compressed.symmetric_eigen().eigenvalues;
    let mut count = 0;
    for &p in parities.iter() {
        if (p - 1.0).abs() < PARITY_TOL {
            continue;
        }
        if (p + 1.0).abs() < PARITY_TOL {
            count += 1;
        } else {
            return Err(Error::NonIntegerParity(p));
        }
    }
    Ok(count)
}

fn to_dmatrix(m: &Matrix2) -> DMatrix<Complex64> {
    DMatrix::from_fn(2, 2, |b, a| m[(b, a)])
}

/// Reflection indices of two-band hoppings under the bond (`σ_x`) or site
/// (`G_k`) inversion.
pub fn reflection_indices(h: &Hoppings, cls: SymmetryClass, tol: f64) -> Result<ReflectionIndex> {
    let r_at = |k: f64| match cls {
        SymmetryClass::Bond => Ok(Matrix2::sigma_x()),
        SymmetryClass::Site => Ok(Matrix2::gauge(k)),
        other => Err(Error::Invalid(format!("reflection index needs bond or site, got {other}"))),
    };
    let at = |k: f64| -> Result<usize> { reflection_index(&to_dmatrix(&eval_bloch(h, k)), &to_dmatrix(&r_at(k)?), tol) };
    Ok(ReflectionIndex { n_minus_0: at(0.0)?, n_minus_pi: at(std::f64::consts::PI)? })
}

/// Eigenvalues of an open chain of `cells` unit cells, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpectrum {
    pub cells: usize,
    pub eigenvalues: Vec<f64>,
}

impl ChainSpectrum {
    /// One eigenvalue per line.
    pub fn to_csv(&self) -> String {
        self.eigenvalues.iter().map(|e| format!("{e}\n")).collect()
    }

    /// Eigenvalues with `|ε| < tol`.
    pub fn near_zero(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|e| e.abs() < tol).count()
    }
}

/// Real-space Hamiltonian of an open chain: block `(r, c)` is `h_{r−c}`,
/// with hoppings leaving `[1, L]` dropped.
pub fn chain_hamiltonian(h: &Hoppings, cells: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(2 * cells, 2 * cells);
    for r in 0..cells {
        for c in 0..cells {
            let j = r as i64 - c as i64;
            let block = if j >= 0 { h.get(j as u32) } else { h.get((-j) as u32).adjoint() };
            for b in 0..2 {
                for a in 0..2 {
                    out[(2 * r + b, 2 * c + a)] = block[(b, a)];
                }
            }
        }
    }
    out
}

pub fn open_chain_spectrum(h: &Hoppings, cells: usize) -> Result<ChainSpectrum> {
    if cells < 2 {
        return Err(Error::Invalid(format!("a chain needs at least 2 cells, got {cells}")));
    }
    let mut eigenvalues: Vec<f64> = chain_hamiltonian(h, cells).symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(ChainSpectrum { cells, eigenvalues })
}
