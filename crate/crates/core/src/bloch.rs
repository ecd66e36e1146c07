//! Tight-binding hoppings, Bloch evaluation and Pauli-vector loops.
//!
//! Hoppings store the real-space blocks `h_j[b][a] = ⟨j,b|H|0,a⟩` for
//! `j ≥ 0` only. The negative blocks are never stored: `h_{−j} = h_j†`, so
//! every evaluated `H(k) = Σ_j h_j e^{−ikj}` is Hermitian by construction.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix2;
use crate::GAP_TOL;

/// Largest grid the refinement loop will try.
pub const GRID_CAP: usize = 1 << 16;

const HERMITIAN_TOL: f64 = 1e-12;
const DECOMPOSE_TOL: f64 = 1e-9;

/// Finite-range real-space hopping blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Hoppings {
    pub name: String,
    terms: BTreeMap<u32, Matrix2>,
}

#[derive(Serialize, Deserialize)]
struct HoppingsFile {
    name: String,
    hoppings: Vec<HoppingTerm>,
}

#[derive(Serialize, Deserialize)]
struct HoppingTerm {
    j: u32,
    m: Matrix2,
}

impl Hoppings {
    /// Hoppings from `(j, h_j)` pairs. Repeated `j` are summed.
    pub fn new(name: impl Into<String>, terms: impl IntoIterator<Item = (u32, Matrix2)>) -> Self {
        let mut map = BTreeMap::new();
        for (j, m) in terms {
            let slot = map.entry(j).or_insert_with(Matrix2::zero);
            *slot = *slot + m;
        }
        map.entry(0).or_insert_with(Matrix2::zero);
        Hoppings { name: name.into(), terms: map }
    }

    pub fn onsite(name: impl Into<String>, h0: Matrix2) -> Self {
        Hoppings::new(name, [(0, h0)])
    }

    pub fn terms(&self) -> &BTreeMap<u32, Matrix2> {
        &self.terms
    }

    pub fn get(&self, j: u32) -> Matrix2 {
        self.terms.get(&j).copied().unwrap_or_default()
    }

    /// Largest stored `j`.
    pub fn range(&self) -> u32 {
        self.terms.keys().next_back().copied().unwrap_or(0)
    }

    /// Drops blocks (other than `h_0`) whose entries are all below `eps`.
    pub fn trimmed(mut self, eps: f64) -> Self {
        self.terms.retain(|&j, m| j == 0 || m.max_abs() > eps);
        self
    }

    /// Largest entrywise difference to `other`, over all `j`.
    pub fn max_difference(&self, other: &Hoppings) -> f64 {
        let keys: std::collections::BTreeSet<u32> =
            self.terms.keys().chain(other.terms.keys()).copied().collect();
        keys.into_iter().map(|j| (self.get(j) - other.get(j)).max_abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HoppingsFile {
            name: self.name.clone(),
            hoppings: self.terms.iter().map(|(&j, &m)| HoppingTerm { j, m }).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: HoppingsFile = serde_json::from_str(s)?;
        Ok(Hoppings::new(file.name, file.hoppings.into_iter().map(|t| (t.j, t.m))))
    }
}

/// A problem found by [`validate_hoppings`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { j: u32 },
    OnsiteNotHermitian { residual: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { j } => write!(f, "h_{j} has non-finite entries"),
            Violation::OnsiteNotHermitian { residual } => {
                write!(f, "h_0 not Hermitian (residual {residual:.3e})")
            }
        }
    }
}

pub fn validate_hoppings(h: &Hoppings) -> Vec<Violation> {
    let mut out = Vec::new();
    for (&j, m) in &h.terms {
        if !m.is_finite() {
            out.push(Violation::NonFinite { j });
        }
    }
    let residual = h.get(0).hermiticity_residual();
    if residual > HERMITIAN_TOL || residual.is_nan() {
        out.push(Violation::OnsiteNotHermitian { residual });
    }
    out
}

/// `H(k) = h_0 + Σ_{j≥1} (h_j e^{−ikj} + h_j† e^{ikj})`.
pub fn eval_bloch(h: &Hoppings, k: f64) -> Matrix2 {
    let mut acc = h.get(0);
    for (&j, m) in h.terms.range(1..) {
        let term = m.scale(Complex64::from_polar(1.0, -k * j as f64));
        acc = acc + term + term.adjoint();
    }
    acc
}

/// Two-sided Fourier coefficients `H(k) = Σ_{j∈ℤ} c_j e^{−ikj}`.
///
/// This is the working representation for symmetry maps and gauge changes,
/// which move entries across positive and negative `j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlochSeries {
    pub coeffs: BTreeMap<i64, Matrix2>,
}

impl BlochSeries {
    pub fn from_hoppings(h: &Hoppings) -> Self {
        let mut coeffs = BTreeMap::new();
        for (&j, &m) in &h.terms {
            if j == 0 {
                coeffs.insert(0, m);
            } else {
                coeffs.insert(j as i64, m);
                coeffs.insert(-(j as i64), m.adjoint());
            }
        }
        BlochSeries { coeffs }
    }

    /// Folds back to stored hoppings. Only valid for series of Hermitian
    /// `H(k)`; `h_0` is re-Hermitized to absorb rounding.
    pub fn to_hoppings(&self, name: impl Into<String>) -> Hoppings {
        let mut terms = Vec::new();
        for (&j, &m) in self.coeffs.range(0..) {
            if j == 0 {
                terms.push((0, (m + m.adjoint()).scale_re(0.5)));
            } else {
                terms.push((j as u32, m));
            }
        }
        Hoppings::new(name, terms).trimmed(0.0)
    }

    pub fn get(&self, j: i64) -> Matrix2 {
        self.coeffs.get(&j).copied().unwrap_or_default()
    }

    pub fn add_at(&mut self, j: i64, m: Matrix2) {
        let slot = self.coeffs.entry(j).or_insert_with(Matrix2::zero);
        *slot = *slot + m;
    }

    pub fn eval(&self, k: f64) -> Matrix2 {
        self.coeffs
            .iter()
            .fold(Matrix2::zero(), |acc, (&j, m)| acc + m.scale(Complex64::from_polar(1.0, -k * j as f64)))
    }

    pub fn map(&self, f: impl Fn(&Matrix2) -> Matrix2) -> Self {
        BlochSeries { coeffs: self.coeffs.iter().map(|(&j, m)| (j, f(m))).collect() }
    }

    pub fn add(&self, other: &BlochSeries) -> Self {
        let mut out = self.clone();
        for (&j, &m) in &other.coeffs {
            out.add_at(j, m);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|m| m.scale_re(s))
    }
}

/// Coefficients of `H = x·σ + t 𝟙`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PauliVec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl PauliVec {
    pub const fn new(x: f64, y: f64, z: f64, t: f64) -> Self {
        PauliVec { x, y, z, t }
    }

    pub const fn traceless(x: f64, y: f64, z: f64) -> Self {
        PauliVec { x, y, z, t: 0.0 }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_xyz(v: [f64; 3], t: f64) -> Self {
        PauliVec { x: v[0], y: v[1], z: v[2], t }
    }

    /// `‖x‖`, the half band splitting.
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_matrix(&self) -> Matrix2 {
        Matrix2::from_pauli(self.x, self.y, self.z, self.t)
    }

    /// Euclidean distance between the traceless parts.
    pub fn dist(&self, other: &PauliVec) -> f64 {
        let d = [self.x - other.x, self.y - other.y, self.z - other.z];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.t.is_finite()
    }

    pub fn lerp(&self, other: &PauliVec, s: f64) -> PauliVec {
        PauliVec {
            x: (1.0 - s) * self.x + s * other.x,
            y: (1.0 - s) * self.y + s * other.y,
            z: (1.0 - s) * self.z + s * other.z,
            t: (1.0 - s) * self.t + s * other.t,
        }
    }
}

/// Angle between the traceless parts of two Pauli vectors.
pub fn angle_between(a: &PauliVec, b: &PauliVec) -> f64 {
    let (u, v) = (a.xyz(), b.xyz());
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let c = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    c.atan2(dot)
}

pub fn pauli_decompose(m: &Matrix2) -> Result<PauliVec> {
    let residual = m.hermiticity_residual();
    if !(residual <= DECOMPOSE_TOL) {
        return Err(Error::NotHermitian { residual });
    }
    Ok(PauliVec {
        x: m[(1, 0)].re,
        y: m[(1, 0)].im,
        z: (m[(0, 0)].re - m[(1, 1)].re) / 2.0,
        t: (m[(0, 0)].re + m[(1, 1)].re) / 2.0,
    })
}

/// Symmetric Brillouin-zone grid `k_m = −π + 2πm/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KGrid {
    n: usize,
}

impl KGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(n));
        }
        Ok(KGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self, m: usize) -> f64 {
        -PI + 2.0 * PI * m as f64 / self.n as f64
    }

    /// Node of `−k_m`.
    pub fn partner(&self, m: usize) -> usize {
        (self.n - m % self.n) % self.n
    }

    /// Node of `k = 0`.
    pub fn zero_node(&self) -> usize {
        self.n / 2
    }

    /// Node of `k = ±π`.
    pub fn pi_node(&self) -> usize {
        0
    }

    pub fn ks(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|m| self.k(m))
    }

    pub fn doubled(&self) -> KGrid {
        KGrid { n: self.n * 2 }
    }
}

/// The curve `γ`: Pauli vectors of `H(k_m)` on a grid, closed modulo `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledLoop {
    pub grid: KGrid,
    pub points: Vec<PauliVec>,
}

impl SampledLoop {
    pub fn new(grid: KGrid, points: Vec<PauliVec>) -> Result<Self> {
        if points.len() != grid.n() {
            return Err(Error::GridMismatch(grid.n(), points.len()));
        }
        Ok(SampledLoop { grid, points })
    }

    pub fn from_fn(grid: KGrid, f: impl Fn(f64) -> PauliVec) -> Self {
        SampledLoop { grid, points: grid.ks().map(f).collect() }
    }

    pub fn constant(grid: KGrid, p: PauliVec) -> Self {
        SampledLoop { grid, points: vec![p; grid.n()] }
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Point at node `m` taken modulo `n`.
    pub fn at(&self, m: usize) -> PauliVec {
        self.points[m % self.n()]
    }

    pub fn matrix(&self, m: usize) -> Matrix2 {
        self.at(m).to_matrix()
    }

    pub fn gap(&self) -> f64 {
        gap(self).min
    }

    /// Largest angle subtended by consecutive gapped nodes (wrapping).
    pub fn max_angle_step(&self) -> f64 {
        let n = self.n();
        (0..n)
            .filter_map(|m| {
                let (a, b) = (self.points[m], self.points[(m + 1) % n]);
                (a.norm() > GAP_TOL && b.norm() > GAP_TOL).then(|| angle_between(&a, &b))
            })
            .fold(0.0, f64::max)
    }

    /// Radially normalised copy with the trace part dropped.
    pub fn normalized(&self) -> SampledLoop {
        let points = self
            .points
            .iter()
            .map(|p| {
                let r = p.norm();
                PauliVec::traceless(p.x / r, p.y / r, p.z / r)
            })
            .collect();
        SampledLoop { grid: self.grid, points }
    }

    /// Largest pointwise distance between traceless parts.
    pub fn max_distance(&self, other: &SampledLoop) -> f64 {
        self.points.iter().zip(&other.points).map(|(a, b)| a.dist(b)).fold(0.0, f64::max)
    }

    /// CSV with header `k,x,y,z,t`, one row per node, `k` ascending from −π.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,x,y,z,t\n");
        for (m, p) in self.points.iter().enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", self.grid.k(m), p.x, p.y, p.z, p.t));
        }
        out
    }
}

/// Samples `γ` for `h`, doubling the grid until consecutive directions
/// subtend less than π/2.
pub fn sample_loop(h: &Hoppings, grid: KGrid) -> Result<SampledLoop> {
    let mut grid = grid;
    loop {
        let points = grid
            .ks()
            .map(|k| pauli_decompose(&eval_bloch(h, k)))
            .collect::<Result<Vec<_>>>()?;
        let lp = SampledLoop { grid, points };
        if lp.max_angle_step() < FRAC_PI_2 {
            return Ok(lp);
        }
        if grid.n() * 2 > GRID_CAP {
            return Err(Error::GridCapExceeded { cap: GRID_CAP });
        }
        grid = grid.doubled();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// `min_k ‖x_k‖`.
    pub min: f64,
    pub max: f64,
    /// `min / max`, zero for the zero loop.
    pub relative: f64,
    /// Node attaining the minimum.
    pub argmin: usize,
}

pub fn gap(lp: &SampledLoop) -> GapReport {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let mut argmin = 0;
    for (m, p) in lp.points.iter().enumerate() {
        let r = p.norm();
        if r < min {
            min = r;
            argmin = m;
        }
        max = max.max(r);
    }
    let relative = if max > 0.0 { min / max } else { 0.0 };
    GapReport { min, max, relative, argmin }
}

/// Projector `(𝟙 − x̂·σ)/2` onto the lower band.
pub fn ground_projector(m: &Matrix2) -> Result<Matrix2> {
    let p = pauli_decompose(m)?;
    let r = p.norm();
    if r <= GAP_TOL {
        return Err(Error::Gapless(format!("‖x‖ = {r:.3e}")));
    }
    Ok((Matrix2::identity() - Matrix2::from_pauli(p.x / r, p.y / r, p.z / r, 0.0)).scale_re(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn close(a: &Matrix2, b: &Matrix2, tol: f64) -> bool {
        (*a - *b).max_abs() < tol
    }

    #[test]
    fn validate_accepts_constant_and_ssh() {
        assert!(validate_hoppings(&fixtures::sigma_z()).is_empty());
        assert!(validate_hoppings(&fixtures::ssh(1.0)).is_empty());
    }

    #[test]
    fn validate_flags_non_hermitian_onsite() {
        let h = Hoppings::onsite("bad", Matrix2::real(0.0, 1.0, 0.0, 0.0));
        let v = validate_hoppings(&h);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("h_0 not Hermitian"));
    }

    #[test]
    fn validate_flags_nan() {
        let h = Hoppings::new("nan", [(0, Matrix2::sigma_z()), (2, Matrix2::real(f64::NAN, 0.0, 0.0, 0.0))]);
        assert!(validate_hoppings(&h).contains(&Violation::NonFinite { j: 2 }));
    }

    #[test]
    fn ssh_at_high_symmetry_points() {
        let h = fixtures::ssh(1.0);
        assert!(close(&eval_bloch(&h, PI), &Matrix2::real(1.0, 0.0, 0.0, -1.0), 1e-15));
        assert!(close(&eval_bloch(&h, 0.0), &Matrix2::real(1.0, 2.0, 2.0, -1.0), 1e-15));
    }

    #[test]
    fn ssh_matches_closed_form() {
        let v = 0.7;
        let h = fixtures::ssh(v);
        for k in [-2.9, -1.0, 0.3, 2.2] {
            let off = Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -k);
            let want = Matrix2::new(Complex64::new(v, 0.0), off, off.conj(), Complex64::new(-v, 0.0));
            assert!(close(&eval_bloch(&h, k), &want, 1e-14));
        }
    }

    #[test]
    fn onsite_only_is_constant() {
        let h = fixtures::sigma_z();
        for k in [-PI, -1.0, 0.0, 2.5] {
            assert_eq!(eval_bloch(&h, k), Matrix2::sigma_z());
        }
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(pauli_decompose(&Matrix2::sigma_x()).unwrap(), PauliVec::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(
            pauli_decompose(&Matrix2::real(1.0, 2.0, 2.0, -1.0)).unwrap(),
            PauliVec::new(2.0, 0.0, 1.0, 0.0)
        );
        assert_eq!(pauli_decompose(&Matrix2::identity()).unwrap(), PauliVec::new(0.0, 0.0, 0.0, 1.0));
        assert!(matches!(
            pauli_decompose(&Matrix2::real(0.0, 1.0, 0.0, 0.0)),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn sample_loop_examples() {
        let g = KGrid::new(8).unwrap();
        let lp = sample_loop(&fixtures::sigma_z(), g).unwrap();
        assert_eq!(lp.n(), 8);
        assert!(lp.points.iter().all(|p| *p == PauliVec::new(0.0, 0.0, 1.0, 0.0)));

        let lp = sample_loop(&fixtures::r_n(1), g).unwrap();
        for (m, p) in lp.points.iter().enumerate() {
            let k = g.k(m);
            assert!((p.x - k.cos()).abs() < 1e-15 && (p.y - k.sin()).abs() < 1e-15);
            assert!(p.z.abs() < 1e-15 && p.t.abs() < 1e-15);
        }

        let lp = sample_loop(&fixtures::ssh(1.0), g).unwrap();
        let at_pi = lp.at(g.pi_node());
        assert!(at_pi.dist(&PauliVec::traceless(0.0, 0.0, 1.0)) < 1e-15);
    }

    #[test]
    fn sample_loop_refines_fast_windings() {
        let lp = sample_loop(&fixtures::r_n(5), KGrid::new(8).unwrap()).unwrap();
        assert!(lp.n() >= 32);
        assert!(lp.max_angle_step() < FRAC_PI_2);
    }

    #[test]
    fn gap_examples() {
        let g = KGrid::new(16).unwrap();
        assert_eq!(gap(&sample_loop(&fixtures::sigma_z(), g).unwrap()).min, 1.0);
        let ssh = gap(&sample_loop(&fixtures::ssh(1.0), g).unwrap());
        assert!((ssh.min - 1.0).abs() < 1e-14);
        assert!((ssh.max - 5f64.sqrt()).abs() < 1e-14);
        let mut lp = SampledLoop::constant(g, PauliVec::traceless(1.0, 0.0, 0.0));
        lp.points[3] = PauliVec::new(0.0, 0.0, 0.0, 0.4);
        assert_eq!(gap(&lp).min, 0.0);
    }

    #[test]
    fn projector_examples() {
        let p = ground_projector(&Matrix2::sigma_z()).unwrap();
        assert!(close(&p, &Matrix2::real(0.0, 0.0, 0.0, 1.0), 1e-15));
        let p = ground_projector(&Matrix2::sigma_x()).unwrap();
        assert!(close(&p, &Matrix2::real(0.5, -0.5, -0.5, 0.5), 1e-15));
        let p = ground_projector(&Matrix2::sigma_z().scale_re(5.0)).unwrap();
        assert!(close(&p, &Matrix2::real(0.0, 0.0, 0.0, 1.0), 1e-15));
        assert!(matches!(ground_projector(&Matrix2::identity()), Err(Error::Gapless(_))));
    }

    #[test]
    fn hoppings_json_roundtrip() {
        let h = fixtures::ssh(0.3);
        let back = Hoppings::from_json(&h.to_json().unwrap()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn csv_header_and_rows() {
        let lp = sample_loop(&fixtures::sigma_x(), KGrid::new(8).unwrap()).unwrap();
        let csv = lp.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "k,x,y,z,t");
        assert_eq!(lines.len(), 9);
        assert!(lines[1].starts_with(&format!("{},", -PI)));
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(KGrid::new(7).is_err());
        assert!(KGrid::new(6).is_err());
        let g = KGrid::new(8).unwrap();
        assert_eq!(g.partner(0), 0);
        assert_eq!(g.partner(4), 4);
        assert_eq!(g.partner(1), 7);
    }
}
