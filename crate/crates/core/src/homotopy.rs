//! Discretized homotopies between sampled loops.
//!
//! A [`HomotopyPath`] is a sequence of loops on one grid. [`verify_path`]
//! decides whether it is a gap- and symmetry-preserving deformation: every
//! frame must satisfy the class constraints, no point may come within the
//! gap tolerance of the origin, and consecutive frames may move each point by
//! at most a quarter of the smaller frame gap.
//!
//! [`witness_to_representative`] builds such a path from any classifiable
//! loop to the representative of its label. It first normalizes the loop
//! radially onto the unit sphere and then applies a contraction that depends
//! on the class:
//!
//! | class | contraction |
//! |---|---|
//! | none, c_minus | stereographic projection from a pole away from the loop, straight line to `+σ_z` |
//! | theta_plus | same, with the pole on the x–z great circle so the mirror `y ↦ −y` is respected |
//! | c_plus, bond | stereographic straight line on the half `k ∈ [0, π]` to the representative arc, rest by symmetry |
//! | site | reparametrization `x_k(t) = x_{(1−t)k − tπ}` on `k ≤ 0`, rest by symmetry |
//! | site_and_theta | the same reparametrization of the `(λ, z)` world line |
//! | site_theta | lifted angle of the `(λ, z)` world line pulled to the constant `π·w` |
//! | chiral, bond_theta, bond_and_theta, cplus_and_theta | lifted polar angle pulled to `w·k` plus the anchor angle |
//! | cminus_and_theta | lifted angle in the x–z plane pulled to `0` |
//!
//! Every stage is sampled with 64 frames, doubled up to 4096 until the
//! continuity contract holds. If the assembled path still fails
//! verification, the construction is retried after moving the normalized
//! loop by a small seeded symmetric perturbation.
//!
//! For the site_theta class the world line `(λ_k, z_k)` satisfies
//! `(λ_π, z_π) = (−λ_{−π}, z_{−π})`, so its lifted polar angle `φ` (measured
//! from `+z`) obeys `φ_π + φ_{−π} = 2πw` for an integer `w`. Moving every
//! `φ_k` linearly to `πw` keeps that relation at all times and ends on
//! `(−1)^w σ_z`; `w` mod 2 equals the crossing parity of the world line.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{eval_bloch, gap, pauli_decompose, sample_loop, Hoppings, KGrid, PauliVec, SampledLoop};
use crate::error::{Error, Result};
use crate::fixtures::representative_loop;
use crate::invariants::{classify, lambda_z_curve, wrap_angle, ClassLabel, LabelKind, Sign};
use crate::matrix::Matrix2;
use crate::symmetry::{residual, symmetrize, Action, SymmetryClass};
use crate::{GAP_TOL, SYM_TOL};

/// Initial frame count of every witness stage.
pub const BASE_STEPS: usize = 64;
/// Frame count beyond which a stage is no longer refined.
pub const MAX_STEPS: usize = 4096;
/// Perturbed retries after the first attempt.
pub const MAX_RETRIES: usize = 8;

const PERTURBATION: f64 = 0.05;
const SNAP_TOL: f64 = 1e-6;
const POLE_CLEARANCE: f64 = 1e-3;
const SOUNDNESS_PAIRS: usize = 200;
const SOUNDNESS_STEPS: usize = 64;
const MAX_DRAWS: usize = 1000;
const MIN_RELATIVE_GAP: f64 = 0.1;

/// A discretized family of loops `t ↦ γ_t`, `t = i/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyPath {
    pub symmetry: SymmetryClass,
    pub frames: Vec<SampledLoop>,
}

#[derive(Serialize, Deserialize)]
struct PathFile {
    symmetry: SymmetryClass,
    grid_n: usize,
    steps: usize,
    frames: Vec<Vec<[f64; 4]>>,
}

impl HomotopyPath {
    pub fn new(symmetry: SymmetryClass, frames: Vec<SampledLoop>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::Invalid("a path needs at least two frames".into()))?;
        if frames.len() < 2 {
            return Err(Error::Invalid("a path needs at least two frames".into()));
        }
        let n = first.n();
        if let Some(f) = frames.iter().find(|f| f.grid != first.grid) {
            return Err(Error::GridMismatch(n, f.n()));
        }
        Ok(HomotopyPath { symmetry, frames })
    }

    pub fn constant(symmetry: SymmetryClass, lp: &SampledLoop) -> Self {
        HomotopyPath { symmetry, frames: vec![lp.clone(), lp.clone()] }
    }

    /// Number of steps `T`; there are `T + 1` frames.
    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn grid(&self) -> KGrid {
        self.frames[0].grid
    }

    pub fn start(&self) -> &SampledLoop {
        &self.frames[0]
    }

    pub fn end(&self) -> &SampledLoop {
        self.frames.last().expect("non-empty")
    }

    pub fn to_json(&self) -> Result<String> {
        let file = PathFile {
            symmetry: self.symmetry,
            grid_n: self.grid().n(),
            steps: self.steps(),
            frames: self
                .frames
                .iter()
                .map(|f| f.points.iter().map(|p| [p.x, p.y, p.z, p.t]).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: PathFile = serde_json::from_str(s)?;
        let grid = KGrid::new(file.grid_n)?;
        if file.frames.len() != file.steps + 1 {
            return Err(Error::Invalid(format!(
                "steps = {} but {} frames given",
                file.steps,
                file.frames.len()
            )));
        }
        let frames = file
            .frames
            .into_iter()
            .map(|f| SampledLoop::new(grid, f.into_iter().map(|[x, y, z, t]| PauliVec::new(x, y, z, t)).collect()))
            .collect::<Result<Vec<_>>>()?;
        HomotopyPath::new(file.symmetry, frames)
    }
}

/// Pointwise straight line `(1 − t)a + t b`.
pub fn linear_path(a: &SampledLoop, b: &SampledLoop, steps: usize) -> Result<HomotopyPath> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(a.n(), b.n()));
    }
    let steps = steps.max(1);
    let frames = (0..=steps)
        .map(|i| {
            let s = i as f64 / steps as f64;
            SampledLoop {
                grid: a.grid,
                points: a.points.iter().zip(&b.points).map(|(p, q)| p.lerp(q, s)).collect(),
            }
        })
        .collect();
    Ok(HomotopyPath { symmetry: SymmetryClass::None, frames })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapFailure {
    pub frame: usize,
    pub t: f64,
    pub node: usize,
    pub k: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryFailure {
    pub frame: usize,
    pub t: f64,
    pub constraint: &'static str,
    pub residual: f64,
}

/// Consecutive frames `frame` and `frame + 1` moved a point too far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityFailure {
    pub frame: usize,
    pub t: f64,
    pub node: usize,
    pub k: f64,
    pub distance: f64,
    pub bound: f64,
}

/// Outcome of [`verify_path`].
#[derive(Debug, Clone, PartialEq)]
pub struct PathReport {
    pub pass: bool,
    pub symmetry: SymmetryClass,
    pub grid_n: usize,
    pub steps: usize,
    pub min_gap: f64,
    pub max_residual: f64,
    pub gap_failure: Option<GapFailure>,
    pub symmetry_failure: Option<SymmetryFailure>,
    pub continuity_failure: Option<ContinuityFailure>,
}

impl fmt::Display for PathReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "result={}", if self.pass { "PASS" } else { "FAIL" })?;
        writeln!(f, "symmetry={}", self.symmetry)?;
        writeln!(f, "grid_n={}", self.grid_n)?;
        writeln!(f, "steps={}", self.steps)?;
        writeln!(f, "min_gap={:.6e}", self.min_gap)?;
        write!(f, "max_residual={:.6e}", self.max_residual)?;
        if let Some(g) = self.gap_failure {
            write!(f, "\ngap_failure=frame:{} t:{:.6} node:{} k:{:.6} norm:{:.3e}", g.frame, g.t, g.node, g.k, g.norm)?;
        }
        if let Some(s) = self.symmetry_failure {
            write!(
                f,
                "\nsymmetry_failure=frame:{} t:{:.6} constraint:{} residual:{:.3e}",
                s.frame, s.t, s.constraint, s.residual
            )?;
        }
        if let Some(c) = self.continuity_failure {
            write!(
                f,
                "\ncontinuity_failure=frame:{} t:{:.6} node:{} k:{:.6} distance:{:.3e} bound:{:.3e}",
                c.frame, c.t, c.node, c.k, c.distance, c.bound
            )?;
        }
        Ok(())
    }
}

/// First node where `b` is farther from `a` than a quarter of the smaller
/// of the two gaps: `(node, distance, bound)`.
fn continuity_breach(a: &SampledLoop, b: &SampledLoop) -> Option<(usize, f64, f64)> {
    let bound = a.gap().min(b.gap()) / 4.0;
    a.points.iter().zip(&b.points).enumerate().find_map(|(m, (p, q))| {
        let d = p.dist(q);
        (!(d <= bound)).then_some((m, d, bound))
    })
}

/// Checks gap, symmetry and continuity of every frame of `p`.
pub fn verify_path(p: &HomotopyPath, tol_gap: f64, tol_sym: f64) -> PathReport {
    let steps = p.steps();
    let t_of = |i: usize| i as f64 / steps as f64;
    let grid = p.grid();
    let mut report = PathReport {
        pass: true,
        symmetry: p.symmetry,
        grid_n: grid.n(),
        steps,
        min_gap: f64::INFINITY,
        max_residual: 0.0,
        gap_failure: None,
        symmetry_failure: None,
        continuity_failure: None,
    };
    for (i, frame) in p.frames.iter().enumerate() {
        let g = gap(frame);
        report.min_gap = report.min_gap.min(g.min);
        if !(g.min >= tol_gap) && report.gap_failure.is_none() {
            report.gap_failure =
                Some(GapFailure { frame: i, t: t_of(i), node: g.argmin, k: grid.k(g.argmin), norm: g.min });
        }
        for (name, r) in residual(frame, p.symmetry).entries {
            report.max_residual = report.max_residual.max(r);
            if !(r <= tol_sym) && report.symmetry_failure.is_none() {
                report.symmetry_failure = Some(SymmetryFailure { frame: i, t: t_of(i), constraint: name, residual: r });
            }
        }
        if report.continuity_failure.is_none() && i + 1 < p.frames.len() {
            if let Some((node, distance, bound)) = continuity_breach(frame, &p.frames[i + 1]) {
                report.continuity_failure =
                    Some(ContinuityFailure { frame: i, t: t_of(i), node, k: grid.k(node), distance, bound });
            }
        }
    }
    report.pass =
        report.gap_failure.is_none() && report.symmetry_failure.is_none() && report.continuity_failure.is_none();
    report
}

type Stage = Box<dyn Fn(f64) -> SampledLoop + Sync>;

/// Samples `stage` on `[0, 1]`, doubling the frame count until the
/// continuity contract holds or [`MAX_STEPS`] is reached.
fn sample_stage(stage: &Stage) -> Vec<SampledLoop> {
    let mut steps = BASE_STEPS;
    loop {
        let frames: Vec<SampledLoop> = (0..=steps).map(|i| stage(i as f64 / steps as f64)).collect();
        let continuous = frames.windows(2).all(|w| continuity_breach(&w[0], &w[1]).is_none());
        if continuous || steps >= MAX_STEPS {
            return frames;
        }
        steps *= 2;
    }
}

fn radial(lp: &SampledLoop) -> Stage {
    let lp = lp.clone();
    Box::new(move |s| {
        let points = lp
            .points
            .iter()
            .map(|p| {
                let d = (1.0 - s) + s * p.norm();
                PauliVec::new(p.x / d, p.y / d, p.z / d, (1.0 - s) * p.t)
            })
            .collect();
        SampledLoop { grid: lp.grid, points }
    })
}

/// `normalize(u + s·p)`.
fn perturb(u: &SampledLoop, p: &SampledLoop) -> Stage {
    let (u, p) = (u.clone(), p.clone());
    Box::new(move |s| {
        let points = u
            .points
            .iter()
            .zip(&p.points)
            .map(|(a, b)| unit(add3(a.xyz(), scale3(b.xyz(), s))))
            .collect();
        SampledLoop { grid: u.grid, points }
    })
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    scale3(a, 1.0 / dot3(a, a).sqrt())
}

fn unit(a: [f64; 3]) -> PauliVec {
    PauliVec::from_xyz(normalize3(a), 0.0)
}

/// Stereographic chart of the unit sphere from the pole `q`.
#[derive(Debug, Clone, Copy)]
struct Stereo {
    q: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
}

impl Stereo {
    /// `e2` is taken as given when supplied (it must be orthogonal to `q`).
    fn new(q: [f64; 3], e2: Option<[f64; 3]>) -> Self {
        let e2 = e2.unwrap_or_else(|| {
            let helper = if q[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            normalize3(cross3(q, helper))
        });
        let e1 = normalize3(cross3(e2, q));
        Stereo { q, e1, e2 }
    }

    fn project(&self, p: [f64; 3]) -> [f64; 2] {
        let d = 1.0 - dot3(p, self.q);
        [dot3(p, self.e1) / d, dot3(p, self.e2) / d]
    }

    fn lift(&self, w: [f64; 2]) -> [f64; 3] {
        let r2 = w[0] * w[0] + w[1] * w[1];
        let v = add3(add3(scale3(self.e1, 2.0 * w[0]), scale3(self.e2, 2.0 * w[1])), scale3(self.q, r2 - 1.0));
        scale3(v, 1.0 / (r2 + 1.0))
    }
}

fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            [r * c, r * s, z]
        })
        .collect()
}

fn xz_circle(count: usize) -> Vec<[f64; 3]> {
    (0..count)
        .map(|i| {
            let (s, c) = (TAU * i as f64 / count as f64).sin_cos();
            [c, 0.0, s]
        })
        .collect()
}

/// The candidate farthest (in chordal distance) from every point of `avoid`.
fn choose_pole(candidates: &[[f64; 3]], avoid: &[[f64; 3]]) -> Result<[f64; 3]> {
    let clearance = |q: &[f64; 3]| {
        avoid
            .iter()
            .map(|p| {
                let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                dot3(d, d)
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    };
    let (best, c) = candidates
        .iter()
        .map(|q| (*q, clearance(q)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::WitnessFailed("no pole candidates".into()))?;
    if c < POLE_CLEARANCE {
        return Err(Error::WitnessFailed(format!("no stereographic pole clears the loop (best {c:.2e})")));
    }
    Ok(best)
}

/// Straight lines in the stereographic chart from `u` to `target` on the
/// nodes in `nodes`; the other nodes are filled in from their partners
/// through `action`.
fn stereo_stage(
    u: &SampledLoop,
    target: &SampledLoop,
    nodes: Vec<usize>,
    chart: Stereo,
    action: Option<Action>,
) -> Stage {
    let grid = u.grid;
    let from: Vec<[f64; 2]> = nodes.iter().map(|&m| chart.project(u.at(m).xyz())).collect();
    let to: Vec<[f64; 2]> = nodes.iter().map(|&m| chart.project(target.at(m).xyz())).collect();
    Box::new(move |s| {
        let mut points = vec![PauliVec::default(); grid.n()];
        for (i, &m) in nodes.iter().enumerate() {
            let w = [(1.0 - s) * from[i][0] + s * to[i][0], (1.0 - s) * from[i][1] + s * to[i][1]];
            points[m] = PauliVec::from_xyz(chart.lift(w), 0.0);
        }
        if let Some(a) = action {
            fill_from_partners(&mut points, grid, &nodes, &a);
        }
        SampledLoop { grid, points }
    })
}

/// Sets every node not in `known` to the action image of its partner.
fn fill_from_partners(points: &mut [PauliVec], grid: KGrid, known: &[usize], action: &Action) {
    let mut have = vec![false; grid.n()];
    for &m in known {
        have[m] = true;
    }
    for m in 0..grid.n() {
        if !have[m] {
            let src = points[grid.partner(m)];
            let mut p = action.image(&src, grid.k(m));
            p.t = 0.0;
            points[m] = p;
        }
    }
}

/// Nodes with `k ∈ [0, π]`.
fn upper_half(grid: KGrid) -> Vec<usize> {
    let mut v: Vec<usize> = (grid.zero_node()..grid.n()).collect();
    v.push(grid.pi_node());
    v
}

/// Nodes with `k ∈ [−π, 0]`.
fn lower_half(grid: KGrid) -> Vec<usize> {
    (0..=grid.zero_node()).collect()
}

fn nlerp2(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    let v = [(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]];
    let r = v[0].hypot(v[1]);
    [v[0] / r, v[1] / r]
}

/// Piecewise normalized-linear interpolation of unit data given at the
/// grid nodes, at `kq ∈ [−π, π]`.
fn node_position(grid: KGrid, kq: f64) -> (usize, f64) {
    let n = grid.n();
    let pos = (kq + PI) / TAU * n as f64;
    let i = (pos.floor().max(0.0) as usize).min(n - 1);
    (i, pos - i as f64)
}

fn interp_loop(u: &SampledLoop, kq: f64) -> PauliVec {
    let (i, f) = node_position(u.grid, kq);
    let (a, b) = (u.at(i).xyz(), u.at(i + 1).xyz());
    unit([(1.0 - f) * a[0] + f * b[0], (1.0 - f) * a[1] + f * b[1], (1.0 - f) * a[2] + f * b[2]])
}

/// Contraction of the half `k ≤ 0` onto the `k = π` anchor by sliding the
/// parameter: `x_k(t) = x_{(1−t)k − tπ}`.
fn reparam_stage(u: &SampledLoop, action: Action) -> Stage {
    let u = u.clone();
    let nodes = lower_half(u.grid);
    Box::new(move |s| {
        let grid = u.grid;
        let mut points = vec![PauliVec::default(); grid.n()];
        for &m in &nodes {
            let kq = (1.0 - s) * grid.k(m) - s * PI;
            points[m] = interp_loop(&u, kq);
        }
        fill_from_partners(&mut points, grid, &nodes, &action);
        SampledLoop { grid, points }
    })
}

fn from_lambda_z(grid: KGrid, m: usize, lambda: f64, z: f64) -> PauliVec {
    let (s, c) = (grid.k(m) / 2.0).sin_cos();
    PauliVec::traceless(lambda * c, lambda * s, z)
}

/// The reparametrization contraction applied to the even `(λ, z)` world line.
fn lambda_z_reparam_stage(u: &SampledLoop) -> Result<Stage> {
    let c = lambda_z_curve(u)?;
    let grid = u.grid;
    let lz: Vec<[f64; 2]> = c.lambda.iter().zip(&c.zed).map(|(&l, &z)| [l, z]).collect();
    Ok(Box::new(move |s| {
        let points = (0..grid.n())
            .map(|m| {
                let k_low = -grid.k(m).abs();
                let kq = (1.0 - s) * k_low - s * PI;
                let (i, f) = node_position(grid, kq);
                let v = nlerp2(lz[i], lz[(i + 1) % grid.n()], f);
                from_lambda_z(grid, m, v[0], v[1])
            })
            .collect();
        SampledLoop { grid, points }
    }))
}

/// Lifted polar angle of the `(λ, z)` world line pulled to `π·w`.
fn lambda_z_angle_stage(u: &SampledLoop, label: ClassLabel) -> Result<Stage> {
    let c = lambda_z_curve(u)?;
    let grid = u.grid;
    let pts = c.open_points();
    let mut phi = Vec::with_capacity(pts.len());
    phi.push(pts[0].0.atan2(pts[0].1));
    for p in &pts[1..] {
        let prev = *phi.last().expect("non-empty");
        phi.push(prev + wrap_angle(p.0.atan2(p.1) - prev));
    }
    let total = (phi[0] + phi[grid.n()]) / TAU;
    let w = total.round();
    if (total - w).abs() > 1e-6 {
        return Err(Error::WitnessFailed(format!("world-line angle sum {total} is not an integer")));
    }
    let odd = (w as i64).rem_euclid(2) == 1;
    if odd != (label.sign == Sign::Minus) {
        return Err(Error::WitnessFailed(format!("world-line angle count {w} disagrees with label {label}")));
    }
    let target = PI * w;
    phi.truncate(grid.n());
    Ok(Box::new(move |s| {
        let points = phi
            .iter()
            .enumerate()
            .map(|(m, &a)| {
                let (l, z) = ((1.0 - s) * a + s * target).sin_cos();
                from_lambda_z(grid, m, l, z)
            })
            .collect();
        SampledLoop { grid, points }
    }))
}

#[derive(Debug, Clone, Copy)]
enum PlanarPlane {
    XY,
    XZ,
}

impl PlanarPlane {
    fn angle(&self, p: &PauliVec) -> f64 {
        match self {
            PlanarPlane::XY => p.y.atan2(p.x),
            PlanarPlane::XZ => p.z.atan2(p.x),
        }
    }

    fn point(&self, a: f64) -> PauliVec {
        let (s, c) = a.sin_cos();
        match self {
            PlanarPlane::XY => PauliVec::traceless(c, s, 0.0),
            PlanarPlane::XZ => PauliVec::traceless(c, 0.0, s),
        }
    }
}

/// Lifted planar angle, starting at `k = 0` and running once around, pulled
/// linearly to `w·k + base`. `base` is the multiple of `base_unit` nearest to
/// the starting angle, so the `k = 0` point stays on its axis.
fn planar_stage(u: &SampledLoop, plane: PlanarPlane, w: i64, base_unit: f64) -> Result<Stage> {
    let grid = u.grid;
    let n = grid.n();
    let order: Vec<usize> = (0..n).map(|s| (grid.zero_node() + s) % n).collect();
    let mut theta = Vec::with_capacity(n + 1);
    theta.push(plane.angle(&u.at(order[0])));
    for s in 1..=n {
        let prev = theta[s - 1];
        theta.push(prev + wrap_angle(plane.angle(&u.at(order[s % n])) - prev));
    }
    let turns = (theta[n] - theta[0]) / TAU;
    if (turns - w as f64).abs() > 1e-6 {
        return Err(Error::WitnessFailed(format!("lifted winding {turns} disagrees with label winding {w}")));
    }
    let base = (theta[0] / base_unit).round() * base_unit;
    Ok(Box::new(move |s| {
        let mut points = vec![PauliVec::default(); n];
        for (i, &m) in order.iter().enumerate() {
            let kt = TAU * i as f64 / n as f64;
            points[m] = plane.point((1.0 - s) * theta[i] + s * (w as f64 * kt + base));
        }
        SampledLoop { grid, points }
    }))
}

fn contraction(u: &SampledLoop, cls: SymmetryClass, label: ClassLabel) -> Result<Stage> {
    use SymmetryClass::*;
    let grid = u.grid;
    let rep = representative_loop(label, grid);
    let winding = match label.kind {
        LabelKind::R(w) => w,
        _ => 0,
    };
    match cls {
        None | CMinus => {
            let mut avoid: Vec<[f64; 3]> = u.points.iter().map(|p| p.xyz()).collect();
            avoid.push([0.0, 0.0, 1.0]);
            let q = choose_pole(&fibonacci_sphere(600), &avoid)?;
            Ok(stereo_stage(u, &rep, (0..grid.n()).collect(), Stereo::new(q, Option::None), Option::None))
        }
        ThetaPlus => {
            let mut avoid: Vec<[f64; 3]> = u.points.iter().map(|p| p.xyz()).collect();
            avoid.push([0.0, 0.0, 1.0]);
            let q = choose_pole(&xz_circle(720), &avoid)?;
            let chart = Stereo::new(q, Some([0.0, 1.0, 0.0]));
            Ok(stereo_stage(u, &rep, (0..grid.n()).collect(), chart, Option::None))
        }
        CPlus | Bond => {
            let nodes = upper_half(grid);
            let avoid: Vec<[f64; 3]> =
                nodes.iter().flat_map(|&m| [u.at(m).xyz(), rep.at(m).xyz()]).collect();
            let q = choose_pole(&fibonacci_sphere(600), &avoid)?;
            Ok(stereo_stage(u, &rep, nodes, Stereo::new(q, Option::None), Some(cls.constraints()[0])))
        }
        Site => Ok(reparam_stage(u, cls.constraints()[0])),
        SiteAndTheta => lambda_z_reparam_stage(u),
        SiteTheta => lambda_z_angle_stage(u, label),
        Chiral | BondTheta => planar_stage(u, PlanarPlane::XY, winding, TAU),
        BondAndTheta | CplusAndTheta => planar_stage(u, PlanarPlane::XY, winding, PI),
        CminusAndTheta => planar_stage(u, PlanarPlane::XZ, 0, TAU),
        ThetaMinus => Err(Error::Gapless("k=0,π (theta_minus forces x_0 = x_pi = 0)".into())),
    }
}

/// Draws hoppings `h_0 … h_range` with independent unit-Gaussian real and
/// imaginary parts; `h_0` is Hermitized.
pub fn random_hoppings<R: Rng + ?Sized>(rng: &mut R, range: u32) -> Hoppings {
    let mut entry = || {
        let (re, im): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        num_complex::Complex64::new(re, im)
    };
    let terms: Vec<(u32, Matrix2)> = (0..=range)
        .map(|j| {
            let m = Matrix2::new(entry(), entry(), entry(), entry());
            (j, if j == 0 { (m + m.adjoint()).scale_re(0.5) } else { m })
        })
        .collect();
    Hoppings::new("random", terms)
}

/// Samples hoppings on `grid` without refinement.
fn sample_on(h: &Hoppings, grid: KGrid) -> Result<SampledLoop> {
    let points = grid.ks().map(|k| pauli_decompose(&eval_bloch(h, k))).collect::<Result<Vec<_>>>()?;
    SampledLoop::new(grid, points)
}

/// A symmetric unit-sphere loop of maximal norm `size`, or `None` if the
/// draw vanished.
fn symmetric_perturbation(rng: &mut ChaCha8Rng, cls: SymmetryClass, grid: KGrid, size: f64) -> Option<SampledLoop> {
    let h = symmetrize(&random_hoppings(rng, 2), cls);
    let lp = sample_on(&h, grid).ok()?;
    let max = gap(&lp).max;
    if !(max > 1e-6) {
        return Option::None;
    }
    let points = lp.points.iter().map(|p| PauliVec::traceless(p.x, p.y, p.z)).map(|p| {
        PauliVec::from_xyz(scale3(p.xyz(), size / max), 0.0)
    });
    Some(SampledLoop { grid, points: points.collect() })
}

/// Knobs for [`witness_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessOptions {
    pub seed: u64,
    pub retries: usize,
    pub tol_gap: f64,
    pub tol_sym: f64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions { seed: 0, retries: MAX_RETRIES, tol_gap: GAP_TOL, tol_sym: SYM_TOL }
    }
}

fn assemble(stages: &[Stage]) -> Vec<SampledLoop> {
    let mut frames: Vec<SampledLoop> = Vec::new();
    for st in stages {
        let part = sample_stage(st);
        let skip = usize::from(!frames.is_empty());
        frames.extend(part.into_iter().skip(skip));
    }
    frames
}

/// Builds a verified gap- and symmetry-preserving path from `lp` to the
/// representative loop of its label.
pub fn witness_to_representative(lp: &SampledLoop, cls: SymmetryClass) -> Result<HomotopyPath> {
    witness_with(lp, cls, &WitnessOptions::default())
}

pub fn witness_with(lp: &SampledLoop, cls: SymmetryClass, opts: &WitnessOptions) -> Result<HomotopyPath> {
    let label = classify(lp, cls)?;
    let rep = representative_loop(label, lp.grid);
    if lp.points == rep.points {
        return Ok(HomotopyPath::constant(cls, lp));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let radial_stage = radial(lp);
    let unit_loop = radial_stage(1.0);
    let mut last_report = String::new();
    for attempt in 0..=opts.retries {
        let mut stages = vec![radial(lp)];
        let mut start = unit_loop.clone();
        if attempt > 0 {
            let Some(p) = symmetric_perturbation(&mut rng, cls, lp.grid, PERTURBATION) else { continue };
            let st = perturb(&unit_loop, &p);
            start = st(1.0);
            stages.push(st);
        }
        match contraction(&start, cls, label) {
            Ok(st) => stages.push(st),
            Err(e) => {
                last_report = e.to_string();
                continue;
            }
        }
        let mut frames = assemble(&stages);
        let end = frames.last_mut().expect("non-empty");
        if end.max_distance(&rep) < SNAP_TOL {
            *end = rep.clone();
        } else {
            last_report = format!("final frame is {:.3e} from {label}", end.max_distance(&rep));
            continue;
        }
        let path = HomotopyPath { symmetry: cls, frames };
        let report = verify_path(&path, opts.tol_gap, opts.tol_sym);
        if report.pass {
            return Ok(path);
        }
        last_report = report.to_string().replace('\n', "; ");
    }
    Err(Error::WitnessFailed(format!("{cls} to {label}: {last_report}")))
}

/// One accepted random sample of a connectivity run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub index: usize,
    pub label: String,
    pub draws: usize,
    pub grid_n: usize,
    pub relative_gap: f64,
    pub witness_steps: usize,
    #[serde(skip)]
    pub class_label: ClassLabel,
    #[serde(skip)]
    pub hoppings: Hoppings,
}

/// Samples joined to one representative by verified witness paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub label: String,
    pub members: Vec<usize>,
}

/// Where a straight line between two loops loses its gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GapClosure {
    /// A sampled point of the frame at `t` is within the gap tolerance.
    BelowTolerance { t: f64 },
    /// The frames at `t_lo` and `t_hi` are gapped with different labels, so
    /// the gap closes in between.
    LabelChange { t_lo: f64, t_hi: f64 },
}

/// Straight-line paths between samples with different labels.
///
/// This is a spot-check: a failing straight line does not prove that no
/// other path exists.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SoundnessCheck {
    pub pairs_checked: usize,
    pub cross_label_pairs: usize,
    /// Failing paths on which a gap closure was located.
    pub failed_on_gap: usize,
    /// Of those, closures located by a label change between frames.
    pub closed_between_frames: usize,
    /// Failing paths without a located gap closure.
    pub failed_otherwise: usize,
    /// Pairs whose straight line verified, which would contradict the labels.
    pub passed: Vec<(usize, usize)>,
}

impl SoundnessCheck {
    pub fn all_failed(&self) -> bool {
        self.passed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub symmetry: SymmetryClass,
    pub range: u32,
    pub seed: u64,
    pub samples: Vec<SampleRecord>,
    pub components: Vec<Component>,
    pub soundness: SoundnessCheck,
    pub clip: i64,
    /// Samples whose `R_n` label has `|n| > clip`.
    pub clipped: usize,
}

impl ConnectivityReport {
    /// Labels of the components, in sorted order.
    pub fn labels(&self) -> Vec<String> {
        self.components.iter().map(|c| c.label.clone()).collect()
    }

    /// Every sample sits in exactly one component, components are
    /// label-pure, and no cross-label straight line verified.
    pub fn is_consistent(&self) -> bool {
        let mut seen = vec![0usize; self.samples.len()];
        for c in &self.components {
            for &i in &c.members {
                if i >= seen.len() || self.samples[i].label != c.label {
                    return false;
                }
                seen[i] += 1;
            }
        }
        seen.iter().all(|&s| s == 1) && self.soundness.all_failed()
    }
}

impl fmt::Display for ConnectivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "symmetry={}", self.symmetry)?;
        writeln!(f, "samples={}", self.samples.len())?;
        writeln!(f, "components={}", self.components.len())?;
        for c in &self.components {
            writeln!(f, "component={} size={}", c.label, c.members.len())?;
        }
        let s = &self.soundness;
        writeln!(f, "cross_label_pairs={}", s.cross_label_pairs)?;
        writeln!(f, "soundness_pairs_checked={}", s.pairs_checked)?;
        writeln!(f, "soundness_failed_on_gap={}", s.failed_on_gap)?;
        writeln!(f, "soundness_closed_between_frames={}", s.closed_between_frames)?;
        writeln!(f, "soundness_failed_otherwise={}", s.failed_otherwise)?;
        writeln!(f, "soundness_passed={}", s.passed.len())?;
        writeln!(f, "soundness_note=straight-line failure is a spot-check, not a proof of disconnection")?;
        writeln!(f, "clip={}", self.clip)?;
        write!(f, "clipped={}", self.clipped)
    }
}

/// Knobs for [`connectivity_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectivityConfig {
    pub symmetry: SymmetryClass,
    pub range: u32,
    pub samples: usize,
    pub seed: u64,
    pub clip: i64,
    /// Worker threads; `0` uses the global pool.
    pub jobs: usize,
    pub grid_n: usize,
}

impl ConnectivityConfig {
    pub fn new(symmetry: SymmetryClass, range: u32, samples: usize, seed: u64) -> Self {
        ConnectivityConfig { symmetry, range, samples, seed, clip: i64::MAX, jobs: 0, grid_n: 128 }
    }
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_sample(cfg: &ConnectivityConfig, index: usize) -> Result<SampleRecord> {
    let cls = cfg.symmetry;
    let grid = KGrid::new(cfg.grid_n)?;
    let mut rng = sample_rng(cfg.seed, index as u64);
    for draws in 1..=MAX_DRAWS {
        let h = symmetrize(&random_hoppings(&mut rng, cfg.range), cls);
        let Ok(lp) = sample_loop(&h, grid) else { continue };
        let g = gap(&lp);
        if g.relative < MIN_RELATIVE_GAP {
            continue;
        }
        let label = match classify(&lp, cls) {
            Ok(l) => l,
            Err(Error::TangentialCrossing { .. }) => continue,
            Err(e) => return Err(Error::Invalid(format!("sample {index}: {e}"))),
        };
        let opts = WitnessOptions { seed: cfg.seed ^ (index as u64).rotate_left(32), ..WitnessOptions::default() };
        let path = witness_with(&lp, cls, &opts)
            .map_err(|e| Error::WitnessFailed(format!("sample {index}: {e}")))?;
        return Ok(SampleRecord {
            index,
            label: label.to_string(),
            draws,
            grid_n: lp.n(),
            relative_gap: g.relative,
            witness_steps: path.steps(),
            class_label: label,
            hoppings: h,
        });
    }
    Err(Error::NoGappedSample { index, attempts: MAX_DRAWS })
}

/// Finds where the straight line from `a` to `b` (in hopping space, which
/// is the pointwise straight line of the loops) loses its gap. Each frame is
/// classified as a loop of its own; since labels are constant on gapped
/// deformations, a label change between frames locates a closure.
pub fn locate_gap_closure(
    a: &Hoppings,
    b: &Hoppings,
    cls: SymmetryClass,
    grid: KGrid,
    steps: usize,
) -> Option<GapClosure> {
    let (sa, sb) = (crate::BlochSeries::from_hoppings(a), crate::BlochSeries::from_hoppings(b));
    let mut last: Option<(f64, ClassLabel)> = Option::None;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let h = sa.scale(1.0 - t).add(&sb.scale(t)).to_hoppings("frame");
        let label = match sample_loop(&h, grid).and_then(|lp| classify(&lp, cls)) {
            Ok(l) => l,
            Err(Error::Gapless(_)) | Err(Error::GridCapExceeded { .. }) => {
                return Some(GapClosure::BelowTolerance { t });
            }
            Err(_) => continue,
        };
        if let Some((t_lo, prev)) = last {
            if prev != label {
                return Some(GapClosure::LabelChange { t_lo, t_hi: t });
            }
        }
        last = Some((t, label));
    }
    Option::None
}

fn straight_line_outcome(
    a: &SampleRecord,
    b: &SampleRecord,
    cls: SymmetryClass,
) -> Result<(PathReport, Option<GapClosure>)> {
    let grid = KGrid::new(a.grid_n.max(b.grid_n))?;
    let mut p = linear_path(&sample_on(&a.hoppings, grid)?, &sample_on(&b.hoppings, grid)?, SOUNDNESS_STEPS)?;
    p.symmetry = cls;
    let report = verify_path(&p, GAP_TOL, SYM_TOL);
    let closure = match report.gap_failure {
        Some(g) => Some(GapClosure::BelowTolerance { t: g.t }),
        Option::None if !report.pass => locate_gap_closure(&a.hoppings, &b.hoppings, cls, grid, SOUNDNESS_STEPS),
        Option::None => Option::None,
    };
    Ok((report, closure))
}

fn run_connectivity(cfg: &ConnectivityConfig) -> Result<ConnectivityReport> {
    let cls = cfg.symmetry;
    if !cls.is_gapped() {
        return Err(Error::Gapless("k=0,π (theta_minus forces x_0 = x_pi = 0)".into()));
    }
    let samples: Vec<SampleRecord> =
        (0..cfg.samples).into_par_iter().map(|i| draw_sample(cfg, i)).collect::<Result<_>>()?;

    let mut groups: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
    for s in &samples {
        groups.entry(s.class_label).or_default().push(s.index);
    }
    let components =
        groups.into_iter().map(|(l, members)| Component { label: l.to_string(), members }).collect();

    let mut pairs = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            if samples[i].class_label != samples[j].class_label {
                pairs.push((i, j));
            }
        }
    }
    let cross_label_pairs = pairs.len();
    if pairs.len() > SOUNDNESS_PAIRS {
        let mut rng = sample_rng(cfg.seed, u64::MAX);
        let mut picked = sample_indices(&mut rng, pairs.len(), SOUNDNESS_PAIRS).into_vec();
        picked.sort_unstable();
        pairs = picked.into_iter().map(|i| pairs[i]).collect();
    }
    let outcomes: Vec<(PathReport, Option<GapClosure>)> = pairs
        .par_iter()
        .map(|&(i, j)| straight_line_outcome(&samples[i], &samples[j], cls))
        .collect::<Result<_>>()?;
    let mut soundness = SoundnessCheck { pairs_checked: pairs.len(), cross_label_pairs, ..Default::default() };
    for (&(i, j), (r, closure)) in pairs.iter().zip(&outcomes) {
        match closure {
            _ if r.pass => soundness.passed.push((i, j)),
            Some(c) => {
                soundness.failed_on_gap += 1;
                if matches!(c, GapClosure::LabelChange { .. }) {
                    soundness.closed_between_frames += 1;
                }
            }
            Option::None => soundness.failed_otherwise += 1,
        }
    }

    let clipped = samples
        .iter()
        .filter(|s| matches!(s.class_label.kind, LabelKind::R(n) if n.abs() > cfg.clip))
        .count();
    Ok(ConnectivityReport {
        symmetry: cls,
        range: cfg.range,
        seed: cfg.seed,
        samples,
        components,
        soundness,
        clip: cfg.clip,
        clipped,
    })
}

/// Random sampling of the gapped region of a class, connected component by
/// component through witness paths.
pub fn connectivity_with(cfg: &ConnectivityConfig) -> Result<ConnectivityReport> {
    if cfg.samples == 0 || cfg.range == 0 {
        return Err(Error::Invalid("samples and range must be at least 1".into()));
    }
    if cfg.jobs == 0 {
        return run_connectivity(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| run_connectivity(cfg))
}

pub fn connectivity_sample(
    cls: SymmetryClass,
    range: u32,
    samples: usize,
    seed: u64,
    clip: i64,
) -> Result<ConnectivityReport> {
    connectivity_with(&ConnectivityConfig { clip, ..ConnectivityConfig::new(cls, range, samples, seed) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn grid() -> KGrid {
        KGrid::new(64).unwrap()
    }

    fn lp(h: &Hoppings) -> SampledLoop {
        sample_loop(h, grid()).unwrap()
    }

    #[test]
    fn constant_path_passes() {
        let p = HomotopyPath::constant(SymmetryClass::SiteAndTheta, &lp(&fixtures::sigma_z()));
        assert!(verify_path(&p, GAP_TOL, SYM_TOL).pass);
    }

    #[test]
    fn linear_path_endpoints_and_scaling() {
        let a = lp(&fixtures::sigma_z());
        let b = SampledLoop::constant(grid(), PauliVec::traceless(0.0, 0.0, 3.0));
        let p = linear_path(&a, &b, 64).unwrap();
        assert_eq!(p.steps(), 64);
        assert_eq!(p.start(), &a);
        assert_eq!(p.end(), &b);
        for (i, f) in p.frames.iter().enumerate() {
            assert!((f.gap() - (1.0 + 2.0 * i as f64 / 64.0)).abs() < 1e-14);
        }
        assert!(verify_path(&p, GAP_TOL, SYM_TOL).pass);

        let same = linear_path(&a, &a, 5).unwrap();
        assert!(same.frames.iter().all(|f| f == &a));
    }

    #[test]
    fn sign_flip_fails_on_gap_at_midpoint() {
        let mut p = linear_path(&lp(&fixtures::sigma_x()), &lp(&fixtures::minus_sigma_x()), 64).unwrap();
        p.symmetry = SymmetryClass::Bond;
        let r = verify_path(&p, GAP_TOL, SYM_TOL);
        assert!(!r.pass);
        assert!(r.symmetry_failure.is_none());
        let g = r.gap_failure.unwrap();
        assert_eq!(g.frame, 32);
        assert_eq!(g.t, 0.5);
    }

    #[test]
    fn linear_path_rejects_grid_mismatch() {
        let a = lp(&fixtures::sigma_z());
        let b = sample_loop(&fixtures::sigma_z(), KGrid::new(32).unwrap()).unwrap();
        assert!(matches!(linear_path(&a, &b, 4), Err(Error::GridMismatch(64, 32))));
    }

    #[test]
    fn radial_stage_passes_on_ssh() {
        let l = lp(&fixtures::ssh(1.0));
        let path = HomotopyPath::new(SymmetryClass::SiteAndTheta, sample_stage(&radial(&l))).unwrap();
        assert!(verify_path(&path, GAP_TOL, SYM_TOL).pass);
        assert!(path.end().points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn witness_for_ssh_under_site() {
        let l = lp(&fixtures::ssh(1.0));
        let p = witness_to_representative(&l, SymmetryClass::Site).unwrap();
        assert!(verify_path(&p, GAP_TOL, SYM_TOL).pass);
        assert_eq!(p.end(), &representative_loop(ClassLabel::plus(LabelKind::SigmaZ), grid()));
    }

    #[test]
    fn witness_of_representative_is_constant() {
        let l = lp(&fixtures::r_n(1));
        let p = witness_to_representative(&l, SymmetryClass::Bond).unwrap();
        assert_eq!(p.steps(), 1);
        assert!(verify_path(&p, GAP_TOL, SYM_TOL).pass);
    }

    #[test]
    fn witness_for_winding_two_chiral_loop() {
        // x + iy = 2e^{2ik} + 0.3e^{ik}, stored in H_10
        let mut s = crate::BlochSeries::default();
        s.add_at(-2, Matrix2::real(0.0, 0.0, 2.0, 0.0));
        s.add_at(2, Matrix2::real(0.0, 2.0, 0.0, 0.0));
        s.add_at(-1, Matrix2::real(0.0, 0.0, 0.3, 0.0));
        s.add_at(1, Matrix2::real(0.0, 0.3, 0.0, 0.0));
        let h = s.to_hoppings("chiral2");
        let l = sample_loop(&h, KGrid::new(128).unwrap()).unwrap();
        assert_eq!(classify(&l, SymmetryClass::Chiral).unwrap(), ClassLabel::plus(LabelKind::R(2)));
        let p = witness_to_representative(&l, SymmetryClass::Chiral).unwrap();
        assert!(verify_path(&p, GAP_TOL, SYM_TOL).pass);
    }

    #[test]
    fn path_json_roundtrip() {
        let p = linear_path(&lp(&fixtures::sigma_z()), &lp(&fixtures::ssh(1.0)), 3).unwrap();
        let back = HomotopyPath::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        let v: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        assert_eq!(v["grid_n"], 64);
        assert_eq!(v["steps"], 3);
        assert_eq!(v["frames"].as_array().unwrap().len(), 4);
        assert_eq!(v["symmetry"], "none");
    }

    #[test]
    fn stereographic_chart_roundtrip() {
        let chart = Stereo::new(normalize3([0.3, -0.2, 0.9]), Option::None);
        for p in fibonacci_sphere(50) {
            let back = chart.lift(chart.project(p));
            assert!(back.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn connectivity_none_is_one_component() {
        let r = connectivity_sample(SymmetryClass::None, 2, 20, 7, i64::MAX).unwrap();
        assert_eq!(r.labels(), vec!["+sigma_z".to_string()]);
        assert!(r.is_consistent());
        assert_eq!(r.soundness.pairs_checked, 0);
    }
}
