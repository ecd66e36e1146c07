//! Topological invariants of symmetric loops and the class labels they
//! determine.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bloch::{gap, KGrid, SampledLoop};
use crate::error::{Error, Result};
use crate::symmetry::{residual, SymmetryClass};
use crate::{GAP_TOL, SYM_TOL};

const PLANAR_TOL: f64 = 1e-9;
const ANCHOR_TOL: f64 = 1e-9;
const INTEGER_TOL: f64 = 1e-6;
const CROSSING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of(v: f64) -> Sign {
        if v < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(&self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelKind {
    SigmaX,
    SigmaZ,
    /// `R_n(k) = [[0, e^{−ink}], [e^{ink}, 0]]`.
    R(i64),
}

/// Canonical representative `sign · kind` of a homotopy class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub sign: Sign,
    pub kind: LabelKind,
}

impl ClassLabel {
    pub const fn new(sign: Sign, kind: LabelKind) -> Self {
        ClassLabel { sign, kind }
    }

    pub const fn plus(kind: LabelKind) -> Self {
        ClassLabel { sign: Sign::Plus, kind }
    }

    pub const fn minus(kind: LabelKind) -> Self {
        ClassLabel { sign: Sign::Minus, kind }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.sign.symbol();
        match self.kind {
            LabelKind::SigmaX => write!(f, "{s}sigma_x"),
            LabelKind::SigmaZ => write!(f, "{s}sigma_z"),
            LabelKind::R(n) => write!(f, "{s}R_{n}"),
        }
    }
}

impl FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad class label '{s}'"));
        let (sign, rest) = match s.as_bytes().first() {
            Some(b'+') => (Sign::Plus, &s[1..]),
            Some(b'-') => (Sign::Minus, &s[1..]),
            _ => (Sign::Plus, s),
        };
        let kind = match rest {
            "sigma_x" => LabelKind::SigmaX,
            "sigma_z" => LabelKind::SigmaZ,
            r => LabelKind::R(r.strip_prefix("R_").ok_or_else(bad)?.parse().map_err(|_| bad())?),
        };
        Ok(ClassLabel { sign, kind })
    }
}

/// The conventional label where it differs from the representative used here.
///
/// The C₋∧Θ₊ row is listed as `{σ_y}`, but constant `σ_y` breaks that
/// row's own Θ₊ constraint; `σ_x` is used as the representative.
pub fn table_alias(cls: SymmetryClass) -> Option<&'static str> {
    match cls {
        SymmetryClass::CminusAndTheta => Some("+sigma_y"),
        _ => None,
    }
}

/// Representative labels for each class, with `R_n` limited to `|n| ≤ max_n`.
pub fn representatives(cls: SymmetryClass, max_n: i64) -> Vec<ClassLabel> {
    use LabelKind::*;
    let rs = |signs: &[Sign]| {
        let mut out = Vec::new();
        for n in -max_n..=max_n {
            for &s in signs {
                out.push(ClassLabel::new(s, R(n)));
            }
        }
        out
    };
    match cls {
        SymmetryClass::None | SymmetryClass::ThetaPlus | SymmetryClass::CMinus => {
            vec![ClassLabel::plus(SigmaZ)]
        }
        SymmetryClass::ThetaMinus => vec![],
        SymmetryClass::CPlus | SymmetryClass::Bond => vec![
            ClassLabel::plus(SigmaX),
            ClassLabel::minus(SigmaX),
            ClassLabel::plus(R(1)),
            ClassLabel::minus(R(1)),
        ],
        SymmetryClass::Site | SymmetryClass::SiteTheta | SymmetryClass::SiteAndTheta => {
            vec![ClassLabel::plus(SigmaZ), ClassLabel::minus(SigmaZ)]
        }
        SymmetryClass::Chiral | SymmetryClass::BondTheta => rs(&[Sign::Plus]),
        SymmetryClass::BondAndTheta | SymmetryClass::CplusAndTheta => rs(&[Sign::Plus, Sign::Minus]),
        SymmetryClass::CminusAndTheta => vec![ClassLabel::plus(SigmaX)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    XY,
    XZ,
}

impl Plane {
    fn name(&self) -> &'static str {
        match self {
            Plane::XY => "x-y",
            Plane::XZ => "x-z",
        }
    }

    /// `(in-plane a, in-plane b, out-of-plane)`.
    fn split(&self, p: &crate::bloch::PauliVec) -> (f64, f64, f64) {
        match self {
            Plane::XY => (p.x, p.y, p.z),
            Plane::XZ => (p.x, p.z, p.y),
        }
    }
}

/// Wraps an angle difference into `(−π, π]`.
pub fn wrap_angle(d: f64) -> f64 {
    let w = d.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Winding number of a planar loop around the origin.
pub fn winding_plane(lp: &SampledLoop, plane: Plane) -> Result<i64> {
    let n = lp.n();
    let mut angles = Vec::with_capacity(n);
    for (m, p) in lp.points.iter().enumerate() {
        let (a, b, out) = plane.split(p);
        if out.abs() >= PLANAR_TOL {
            return Err(Error::NotPlanar { plane: plane.name(), node: m, out_of_plane: out.abs() });
        }
        if a.hypot(b) <= GAP_TOL {
            return Err(Error::Gapless(format!("k={:.6} (node {m})", lp.grid.k(m))));
        }
        angles.push(b.atan2(a));
    }
    let mut total = 0.0;
    for m in 0..n {
        let step = wrap_angle(angles[(m + 1) % n] - angles[m]);
        if step.abs() >= PI / 2.0 {
            return Err(Error::AngleStepTooLarge { node: m, next: (m + 1) % n, step });
        }
        total += step;
    }
    let w = total / TAU;
    let r = w.round();
    if (w - r).abs() > INTEGER_TOL {
        return Err(Error::Invalid(format!("accumulated winding {w} is not an integer")));
    }
    Ok(r as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPoint {
    Zero,
    Pi,
}

impl FixedPoint {
    fn node(&self, grid: &KGrid) -> usize {
        match self {
            FixedPoint::Zero => grid.zero_node(),
            FixedPoint::Pi => grid.pi_node(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FixedPoint::Zero => "0",
            FixedPoint::Pi => "pi",
        }
    }
}

/// Sign of the anchoring point on `axis` at `k = 0` or `k = π`.
pub fn anchor_sign(lp: &SampledLoop, axis: Axis, at: FixedPoint) -> Result<Sign> {
    let p = lp.at(at.node(&lp.grid));
    if p.norm() <= GAP_TOL {
        return Err(Error::Gapless(format!("k={}", at.name())));
    }
    let (on, off1, off2, name) = match axis {
        Axis::X => (p.x, p.y, p.z, "x"),
        Axis::Z => (p.z, p.x, p.y, "z"),
    };
    if off1.abs() >= ANCHOR_TOL || off2.abs() >= ANCHOR_TOL || on.abs() <= ANCHOR_TOL {
        return Err(Error::NotAnchored { axis: name, at: at.name() });
    }
    Ok(Sign::of(on))
}

/// Anchor signs at `(k = 0, k = π)`.
pub fn anchor_signs(lp: &SampledLoop, axis: Axis) -> Result<(Sign, Sign)> {
    Ok((anchor_sign(lp, axis, FixedPoint::Zero)?, anchor_sign(lp, axis, FixedPoint::Pi)?))
}

/// World line of an S∘Θ₊-symmetric loop in the `(λ, z)` plane, where
/// `(x_k, y_k) = λ_k (cos k/2, sin k/2)`.
///
/// Nodes run from `k = −π` upward; the curve ends at `k = π` on the mirror
/// image `(−λ_0, z_0)` of its first node.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaZCurve {
    pub grid: KGrid,
    pub lambda: Vec<f64>,
    pub zed: Vec<f64>,
}

impl LambdaZCurve {
    /// The `n + 1` points of the open curve, including the `k = π` end.
    pub fn open_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<_> = self.lambda.iter().copied().zip(self.zed.iter().copied()).collect();
        pts.push((-self.lambda[0], self.zed[0]));
        pts
    }
}

pub fn lambda_z_curve(lp: &SampledLoop) -> Result<LambdaZCurve> {
    let mut lambda = Vec::with_capacity(lp.n());
    for (m, p) in lp.points.iter().enumerate() {
        let (s, c) = (lp.grid.k(m) / 2.0).sin_cos();
        let perp = -p.x * s + p.y * c;
        if perp.abs() >= SYM_TOL {
            return Err(Error::ConstraintViolated(format!(
                "(x, y) not along (cos k/2, sin k/2) at node {m}: residual {perp:.3e}"
            )));
        }
        lambda.push(p.x * c + p.y * s);
    }
    Ok(LambdaZCurve { grid: lp.grid, lambda, zed: lp.points.iter().map(|p| p.z).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(count: i64) -> Parity {
        if count.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Parity of the number of crossings of the `−z` half axis by the interior
/// of the world line.
pub fn crossing_parity(c: &LambdaZCurve) -> Result<Parity> {
    let pts = c.open_points();
    let on_axis = |l: f64| l.abs() < CROSSING_TOL;

    if pts.iter().all(|p| on_axis(p.0)) {
        return if pts.iter().all(|p| p.1 > 0.0) {
            Ok(Parity::Even)
        } else if pts.iter().all(|p| p.1 < 0.0) {
            Ok(Parity::Odd)
        } else {
            Err(Error::Gapless("world line passes through the origin".into()))
        };
    }

    let off: Vec<usize> = (0..pts.len()).filter(|&i| !on_axis(pts[i].0)).collect();
    let mut crossings = 0i64;
    for w in off.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (li, zi) = pts[i];
        let (lj, zj) = pts[j];
        if li.signum() == lj.signum() {
            continue;
        }
        let z = if j == i + 1 {
            zi + (zj - zi) * li / (li - lj)
        } else {
            // the curve runs along the axis between i and j
            let zs: Vec<f64> = pts[i + 1..j].iter().map(|p| p.1).collect();
            if !(zs.iter().all(|&z| z > 0.0) || zs.iter().all(|&z| z < 0.0)) {
                return Err(Error::TangentialCrossing { node: i, next: j, z: 0.0 });
            }
            zs[0]
        };
        if z.abs() < CROSSING_TOL {
            return Err(Error::TangentialCrossing { node: i, next: j, z });
        }
        if z < 0.0 {
            crossings += 1;
        }
    }
    Ok(Parity::of(crossings))
}

/// A label with the raw invariants it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: SymmetryClass,
    pub label: ClassLabel,
    pub gap: f64,
    pub invariants: Vec<(&'static str, String)>,
}

/// Checks the class preconditions: symmetric within `tol` and gapped.
pub fn check_preconditions(lp: &SampledLoop, cls: SymmetryClass, tol: f64) -> Result<f64> {
    if cls == SymmetryClass::ThetaMinus {
        return Err(Error::Gapless("k=0,π (theta_minus forces x_0 = x_pi = 0)".into()));
    }
    let r = residual(lp, cls);
    if r.max() > tol {
        let worst = r.entries.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        return Err(Error::ConstraintViolated(format!("{} residual {:.3e}", worst.0, worst.1)));
    }
    let g = gap(lp);
    if g.min <= tol {
        return Err(Error::Gapless(format!("k={:.6} (‖x‖ = {:.3e})", lp.grid.k(g.argmin), g.min)));
    }
    Ok(g.min)
}

pub fn classify_with_tol(lp: &SampledLoop, cls: SymmetryClass, tol: f64) -> Result<Classification> {
    use LabelKind::*;
    let gap = check_preconditions(lp, cls, tol)?;
    let fmt_sign = |s: Sign| s.symbol().to_string();
    let mut inv = Vec::new();
    let label = match cls {
        SymmetryClass::None | SymmetryClass::ThetaPlus | SymmetryClass::CMinus => ClassLabel::plus(SigmaZ),
        SymmetryClass::ThetaMinus => unreachable!("rejected as gapless"),
        SymmetryClass::CPlus | SymmetryClass::Bond => {
            let (s0, spi) = anchor_signs(lp, Axis::X)?;
            inv.push(("anchor_x_0", fmt_sign(s0)));
            inv.push(("anchor_x_pi", fmt_sign(spi)));
            match (s0, spi) {
                (Sign::Plus, Sign::Plus) => ClassLabel::plus(SigmaX),
                (Sign::Minus, Sign::Minus) => ClassLabel::minus(SigmaX),
                (Sign::Plus, Sign::Minus) => ClassLabel::plus(R(1)),
                (Sign::Minus, Sign::Plus) => ClassLabel::minus(R(1)),
            }
        }
        SymmetryClass::Site | SymmetryClass::SiteAndTheta => {
            let s = anchor_sign(lp, Axis::Z, FixedPoint::Pi)?;
            inv.push(("anchor_z_pi", fmt_sign(s)));
            ClassLabel::new(s, SigmaZ)
        }
        SymmetryClass::Chiral | SymmetryClass::BondTheta => {
            let w = winding_plane(lp, Plane::XY)?;
            inv.push(("winding_xy", w.to_string()));
            ClassLabel::plus(R(w))
        }
        SymmetryClass::BondAndTheta | SymmetryClass::CplusAndTheta => {
            let w = winding_plane(lp, Plane::XY)?;
            let s = anchor_sign(lp, Axis::X, FixedPoint::Zero)?;
            inv.push(("winding_xy", w.to_string()));
            inv.push(("anchor_x_0", fmt_sign(s)));
            ClassLabel::new(s, R(w))
        }
        SymmetryClass::SiteTheta => {
            let parity = crossing_parity(&lambda_z_curve(lp)?)?;
            inv.push(("crossing_parity", format!("{parity:?}").to_lowercase()));
            match parity {
                Parity::Even => ClassLabel::plus(SigmaZ),
                Parity::Odd => ClassLabel::minus(SigmaZ),
            }
        }
        SymmetryClass::CminusAndTheta => ClassLabel::plus(SigmaX),
    };
    Ok(Classification { class: cls, label, gap, invariants: inv })
}

/// Homotopy class label of `lp` under `cls`.
pub fn classify(lp: &SampledLoop, cls: SymmetryClass) -> Result<ClassLabel> {
    classify_with_tol(lp, cls, SYM_TOL).map(|c| c.label)
}

/// How a label transforms under the unit-cell change `G_k^l`.
pub fn relabel_under_gauge(label: ClassLabel, l: i64) -> ClassLabel {
    let kind = match label.kind {
        LabelKind::SigmaZ => LabelKind::SigmaZ,
        LabelKind::SigmaX if l == 0 => LabelKind::SigmaX,
        LabelKind::SigmaX => LabelKind::R(l),
        LabelKind::R(n) => LabelKind::R(n + l),
    };
    ClassLabel { sign: label.sign, kind }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{sample_loop, PauliVec};
    use crate::fixtures;

    fn grid() -> KGrid {
        KGrid::new(128).unwrap()
    }

    fn lp(h: &crate::Hoppings) -> SampledLoop {
        sample_loop(h, grid()).unwrap()
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_plane(&lp(&fixtures::r_n(3)), Plane::XY).unwrap(), 3);
        assert_eq!(winding_plane(&lp(&fixtures::sigma_x()), Plane::XY).unwrap(), 0);
        assert_eq!(winding_plane(&lp(&fixtures::r_n(-1)), Plane::XY).unwrap(), -1);
        assert_eq!(winding_plane(&lp(&fixtures::real_rotor(2)), Plane::XZ).unwrap(), 2);
    }

    #[test]
    fn winding_errors() {
        assert!(matches!(winding_plane(&lp(&fixtures::ssh(1.0)), Plane::XY), Err(Error::NotPlanar { .. })));
        let mut l = lp(&fixtures::r_n(1));
        l.points[5] = PauliVec::default();
        assert!(matches!(winding_plane(&l, Plane::XY), Err(Error::Gapless(_))));
        let coarse = SampledLoop::from_fn(KGrid::new(8).unwrap(), |k| {
            PauliVec::traceless((3.0 * k).cos(), (3.0 * k).sin(), 0.0)
        });
        assert!(matches!(winding_plane(&coarse, Plane::XY), Err(Error::AngleStepTooLarge { .. })));
    }

    #[test]
    fn anchor_examples() {
        assert_eq!(anchor_signs(&lp(&fixtures::sigma_x()), Axis::X).unwrap(), (Sign::Plus, Sign::Plus));
        assert_eq!(anchor_signs(&lp(&fixtures::r_n(1)), Axis::X).unwrap(), (Sign::Plus, Sign::Minus));
        assert_eq!(anchor_sign(&lp(&fixtures::ssh(1.0)), Axis::Z, FixedPoint::Pi).unwrap(), Sign::Plus);
        assert!(matches!(
            anchor_sign(&lp(&fixtures::ssh(1.0)), Axis::Z, FixedPoint::Zero),
            Err(Error::NotAnchored { .. })
        ));
    }

    #[test]
    fn lambda_z_examples() {
        let c = lambda_z_curve(&lp(&fixtures::sigma_z())).unwrap();
        assert!(c.lambda.iter().all(|&l| l == 0.0));
        assert!(c.zed.iter().all(|&z| z == 1.0));

        let g = grid();
        let l = SampledLoop::from_fn(g, |k| PauliVec::traceless(k.sin() / 2.0, (1.0 - k.cos()) / 2.0, -k.cos()));
        let c = lambda_z_curve(&l).unwrap();
        for (m, &lam) in c.lambda.iter().enumerate() {
            assert!((lam - (g.k(m) / 2.0).sin()).abs() < 1e-14);
        }

        assert!(matches!(lambda_z_curve(&lp(&fixtures::sigma_x())), Err(Error::ConstraintViolated(_))));
    }

    fn curve(g: KGrid, f: impl Fn(f64) -> (f64, f64)) -> LambdaZCurve {
        let (lambda, zed) = g.ks().map(f).unzip();
        LambdaZCurve { grid: g, lambda, zed }
    }

    #[test]
    fn crossing_parity_examples() {
        let g = grid();
        assert_eq!(crossing_parity(&curve(g, |_| (0.0, 1.0))).unwrap(), Parity::Even);
        assert_eq!(crossing_parity(&curve(g, |_| (0.0, -1.0))).unwrap(), Parity::Odd);
        assert_eq!(crossing_parity(&curve(g, |k| ((k / 2.0).sin(), -k.cos()))).unwrap(), Parity::Odd);
        assert_eq!(crossing_parity(&curve(g, |k| ((k / 2.0).sin(), k.cos()))).unwrap(), Parity::Even);
    }

    #[test]
    fn crossing_at_origin_is_tangential() {
        // λ changes sign between nodes exactly where z = 0
        let g = KGrid::new(8).unwrap();
        let c = LambdaZCurve {
            grid: g,
            lambda: vec![1.0, 1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            zed: vec![1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        };
        assert!(matches!(crossing_parity(&c), Err(Error::TangentialCrossing { .. })));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&lp(&fixtures::ssh(1.0)), SymmetryClass::Site).unwrap(), ClassLabel::plus(LabelKind::SigmaZ));
        assert_eq!(classify(&lp(&fixtures::r_n(2)), SymmetryClass::Chiral).unwrap(), ClassLabel::plus(LabelKind::R(2)));
        assert_eq!(
            classify(&lp(&fixtures::minus_sigma_x()), SymmetryClass::Bond).unwrap(),
            ClassLabel::minus(LabelKind::SigmaX)
        );
    }

    #[test]
    fn classify_errors() {
        assert!(matches!(classify(&lp(&fixtures::ssh(1.0)), SymmetryClass::ThetaMinus), Err(Error::Gapless(_))));
        assert!(matches!(classify(&lp(&fixtures::ssh(1.0)), SymmetryClass::Chiral), Err(Error::ConstraintViolated(_))));
        let zero = SampledLoop::constant(grid(), PauliVec::default());
        assert!(matches!(classify(&zero, SymmetryClass::Chiral), Err(Error::Gapless(_))));
    }

    #[test]
    fn relabel_examples() {
        use LabelKind::*;
        assert_eq!(relabel_under_gauge(ClassLabel::plus(SigmaX), 1), ClassLabel::plus(R(1)));
        assert_eq!(relabel_under_gauge(ClassLabel::plus(R(2)), -2), ClassLabel::plus(R(0)));
        assert_eq!(relabel_under_gauge(ClassLabel::minus(SigmaZ), 7), ClassLabel::minus(SigmaZ));
        assert_eq!(relabel_under_gauge(ClassLabel::minus(SigmaX), 0), ClassLabel::minus(SigmaX));
    }

    #[test]
    fn label_text_roundtrip() {
        for l in [ClassLabel::plus(LabelKind::SigmaZ), ClassLabel::minus(LabelKind::SigmaX), ClassLabel::minus(LabelKind::R(-2))] {
            assert_eq!(l.to_string().parse::<ClassLabel>().unwrap(), l);
        }
        assert_eq!(ClassLabel::plus(LabelKind::R(2)).to_string(), "+R_2");
    }
}
